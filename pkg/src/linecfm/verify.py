"""Verification suites with independent oracles, shared by the CLI and tests.

Each suite returns CheckResult records.  The oracles here deliberately take
the slow road: dense materialized projectors, O(N^2) DFT sums, and central
finite differences, so they share no code path with the matrix-free, FFT, and
analytic-gradient implementations they check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flow, geometry, net, sampler, spectral
from .geometry import VariantLine

__all__ = [
    "CheckResult",
    "naive_dft",
    "dense_projector",
    "finite_difference_grads",
    "rel_err",
    "geometry_checks",
    "ot_reduction_check",
    "moment_checks",
    "signal_checks",
    "gradient_checks",
    "vcs_checks",
    "print_results",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  ({self.detail})"


def print_results(results: list[CheckResult]) -> bool:
    ok = True
    for result in results:
        print(result.line())
        ok = ok and result.passed
    return ok


def rel_err(actual: np.ndarray, expected: np.ndarray, floor: float = 1e-300) -> float:
    """Relative error in the 2-norm, guarded against a zero reference."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = max(float(np.linalg.norm(expected)), floor)
    return float(np.linalg.norm(actual - expected)) / denom


# ---------------------------------------------------------------------------
# oracles


def naive_dft(frame) -> np.ndarray:
    """O(N^2) one-sided DFT by direct summation (oracle for spectral.dft)."""
    frame = np.asarray(frame, dtype=float)
    n = frame.size
    bins = n // 2 + 1
    out = np.empty(bins, dtype=complex)
    for k in range(bins):
        acc = 0.0 + 0.0j
        for i in range(n):
            acc += frame[i] * np.exp(-2j * np.pi * k * i / n)
        out[k] = acc
    return out


def dense_projector(direction) -> np.ndarray:
    """Materialized rank-1 projector (oracle for the matrix-free operations)."""
    a = np.asarray(direction, dtype=float)
    return np.outer(a, a) / (a @ a)


def finite_difference_grads(loss_fn, model: net.VectorFieldModel, step: float = 1e-6):
    """Central-difference gradients of ``loss_fn(model)`` for every parameter."""
    grads_w, grads_b = [], []
    for w in model.weights:
        g = np.empty_like(w)
        flat = w.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn(model)
            flat[i] = orig - step
            lo = loss_fn(model)
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * step)
        grads_w.append(g)
    for b in model.biases:
        g = np.empty_like(b)
        for i in range(b.size):
            orig = b[i]
            b[i] = orig + step
            hi = loss_fn(model)
            b[i] = orig - step
            lo = loss_fn(model)
            b[i] = orig
            g[i] = (hi - lo) / (2.0 * step)
        grads_b.append(g)
    return grads_w, grads_b


# ---------------------------------------------------------------------------
# geometry suite


def _random_line(rng, dim: int) -> VariantLine:
    while True:
        a = rng.standard_normal(dim)
        if np.linalg.norm(a) > 1e-6:
            return VariantLine(direction=a, offset=rng.standard_normal(dim))


def geometry_checks(seed: int = 0, cases: int = 1000,
                    dims: tuple[int, ...] = (2, 8, 1024)) -> list[CheckResult]:
    """Projector and conditional-velocity invariants over random cases."""
    rng = np.random.default_rng(seed)
    worst = {
        "idempotence": 0.0,
        "annihilation": 0.0,
        "recomposition": 0.0,
        "scale_invariance": 0.0,
        "orthogonality": 0.0,
        "closed_form": 0.0,
    }
    for dim in dims:
        for _ in range(cases):
            line = _random_line(rng, dim)
            v = rng.standard_normal(dim)
            p = geometry.project(line, v)
            r = geometry.reject(line, v)
            worst["idempotence"] = max(
                worst["idempotence"], rel_err(geometry.project(line, p), p)
            )
            a_norm = np.linalg.norm(line.direction)
            worst["annihilation"] = max(
                worst["annihilation"],
                float(np.linalg.norm(geometry.reject(line, line.direction))) / a_norm,
            )
            worst["recomposition"] = max(worst["recomposition"], rel_err(p + r, v))
            scale = rng.uniform(0.1, 10.0) * rng.choice([-1.0, 1.0])
            scaled = VariantLine(direction=scale * line.direction, offset=line.offset)
            worst["scale_invariance"] = max(
                worst["scale_invariance"], rel_err(geometry.project(scaled, v), p)
            )
            sigma = rng.uniform(1e-4, 1.0)
            x0 = rng.standard_normal(dim)
            u = geometry.conditional_velocity(line, sigma, x0)
            u_norm = np.linalg.norm(u)
            worst["orthogonality"] = max(
                worst["orthogonality"],
                abs(float(line.direction @ u)) / (a_norm * u_norm),
            )
            closed = geometry.reject(line, line.offset - (1.0 - sigma) * x0)
            worst["closed_form"] = max(worst["closed_form"], rel_err(u, closed))

    # dense-matrix oracle at small dimension
    dense_worst = 0.0
    for _ in range(cases):
        line = _random_line(rng, 8)
        v = rng.standard_normal(8)
        p_dense = dense_projector(line.direction) @ v
        dense_worst = max(dense_worst, rel_err(geometry.project(line, v), p_dense))
        dense_worst = max(dense_worst, rel_err(geometry.reject(line, v), v - p_dense))

    bounds = {
        "idempotence": 1e-12,
        "annihilation": 1e-12,
        "recomposition": 1e-14,
        "scale_invariance": 1e-12,
        "orthogonality": 1e-10,
        "closed_form": 1e-12,
    }
    results = [
        CheckResult(
            name=f"geometry {key} (dims {dims}, {cases} cases each)",
            passed=worst[key] <= bound,
            detail=f"worst {worst[key]:.3e} <= {bound:.0e}",
        )
        for key, bound in bounds.items()
    ]
    results.append(
        CheckResult(
            name=f"geometry dense projector oracle (d=8, {cases} cases)",
            passed=dense_worst <= 1e-12,
            detail=f"worst {dense_worst:.3e} <= 1e-12",
        )
    )
    return results


def ot_reduction_check(seed: int = 0, cases: int = 1000, dim: int = 8) -> CheckResult:
    """Degenerate-line reduction against the straight-path closed forms.

    Substituting a zero projector, offset = target point, and shrink factor =
    sigma_min into the line machinery must reproduce the point-target path and
    velocity formulas to near machine precision.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        x1 = rng.standard_normal(dim)
        x0 = rng.standard_normal(dim)
        sigma = float(rng.choice([1e-4, 1e-2, 0.25]))
        t = float(rng.uniform())
        # line machinery with the zero-projector substitution
        endpoint_sub = (x1 - 0.0) + (sigma * x0 + (1.0 - sigma) * 0.0)
        velocity_sub = endpoint_sub - x0
        xt_sub = geometry.path_point(x0, endpoint_sub, t)
        endpoint, velocity = geometry.ot_target_and_velocity(x1, sigma, x0)
        worst = max(worst, rel_err(endpoint, endpoint_sub))
        worst = max(worst, rel_err(velocity, velocity_sub))
        # closed forms of the straight path
        worst = max(worst, rel_err(velocity_sub, x1 - (1.0 - sigma) * x0))
        worst = max(worst, rel_err(xt_sub, (1.0 - (1.0 - sigma) * t) * x0 + t * x1))
    return CheckResult(
        name=f"ot reduction (d={dim}, {cases} cases)",
        passed=worst <= 1e-14,
        detail=f"worst {worst:.3e} <= 1e-14",
    )


def moment_checks(seed: int = 0, draws: int = 100_000, dim: int = 16,
                  sigma: float = 0.1) -> list[CheckResult]:
    """Monte Carlo moments of the line-aligned target distribution.

    Checks the empirical mean against the projected offset (4 standard errors
    per coordinate), the variance along the line (within 5% of 1), and the
    orthogonal residual width (within 5% of sigma).  A very thin width is
    additionally checked only for small absolute residuals.
    """
    rng = np.random.default_rng(seed)
    line = _random_line(rng, dim)
    results = []
    for width, tight in ((sigma, True), (0.5, True), (1e-4, False)):
        x0 = rng.standard_normal((draws, dim))
        endpoints = geometry.sample_target(line, width, x0)
        mean_true = geometry.target_mean(line)
        emp_mean = endpoints.mean(axis=0)
        se = endpoints.std(axis=0, ddof=1) / np.sqrt(draws)
        mean_ok = bool(np.all(np.abs(emp_mean - mean_true) <= 4.0 * se))
        mean_dev = float(np.max(np.abs(emp_mean - mean_true) / se))
        unit = line.direction / np.linalg.norm(line.direction)
        par_var = float(np.var((endpoints - mean_true) @ unit, ddof=1))
        residual = geometry.reject(line, endpoints - line.offset)
        if tight:
            ortho_std = float(
                np.sqrt(np.sum(residual * residual) / (draws * (dim - 1)))
            )
            ortho_ok = abs(ortho_std - width) <= 0.05 * width
            ortho_detail = f"ortho std {ortho_std:.5f} vs {width} (+-5%)"
        else:
            worst_norm = float(np.max(np.linalg.norm(residual, axis=1)))
            ortho_ok = worst_norm < 1e-3
            ortho_detail = f"max residual {worst_norm:.2e} < 1e-3"
        par_ok = abs(par_var - 1.0) <= 0.05
        results.append(
            CheckResult(
                name=f"target moments (width={width}, {draws} draws, d={dim})",
                passed=mean_ok and par_ok and ortho_ok,
                detail=(
                    f"max mean dev {mean_dev:.2f} SE <= 4; parallel var {par_var:.4f} "
                    f"(+-5%); {ortho_detail}"
                ),
            )
        )
    return results


# ---------------------------------------------------------------------------
# signal suite


def signal_checks(seed: int = 0, signal=None, label: str = "synthetic") -> list[CheckResult]:
    """DFT, round-trip, scaling, and shifting verifications.

    ``signal`` defaults to a seeded noisy tone; a WAV's samples can be passed
    instead.  The windowed linear-shift error is reported without a bound.
    """
    rng = np.random.default_rng(seed)
    if signal is None:
        t = np.arange(8192)
        signal = 0.5 * np.sin(2.0 * np.pi * 220.0 * t / 22050.0)
        signal = signal + 0.1 * rng.standard_normal(t.size)
    else:
        signal = np.asarray(signal, dtype=float)
        if signal.size < 4096:
            raise ValueError("need at least 4096 samples for the signal checks")
    results = []

    worst_dft = 0.0
    for n_fft in (16, 64):
        for _ in range(20):
            frame = rng.standard_normal(n_fft)
            worst_dft = max(
                worst_dft,
                float(np.max(np.abs(spectral.dft(frame) - naive_dft(frame)))),
            )
    results.append(CheckResult(
        name="dft vs naive O(N^2) oracle (N=16,64)",
        passed=worst_dft <= 1e-10,
        detail=f"worst abs err {worst_dft:.3e} <= 1e-10",
    ))

    worst_parseval = 0.0
    for _ in range(50):
        frame = rng.standard_normal(64)
        spectrum = spectral.dft(frame)
        energy = (np.abs(spectrum[0]) ** 2
                  + 2.0 * np.sum(np.abs(spectrum[1:-1]) ** 2)
                  + np.abs(spectrum[-1]) ** 2) / 64.0
        worst_parseval = max(
            worst_parseval, abs(energy - float(frame @ frame)) / float(frame @ frame)
        )
    results.append(CheckResult(
        name="parseval identity (N=64)",
        passed=worst_parseval <= 1e-9,
        detail=f"worst rel err {worst_parseval:.3e} <= 1e-9",
    ))

    config = spectral.StftConfig(n_fft=1024, hop=256, window="hann")
    chunk = signal[:4096]
    rebuilt = spectral.istft(spectral.stft(chunk, config))
    round_trip = float(np.max(np.abs(rebuilt - chunk)))
    results.append(CheckResult(
        name=f"stft round trip ({label}, hann, hop=n_fft/4)",
        passed=round_trip <= 1e-8,
        detail=f"max abs err {round_trip:.3e} <= 1e-8",
    ))

    worst_scale = 0.0
    for s in (0.5, 2.0, -3.0):
        worst_scale = max(worst_scale, spectral.verify_scaling(chunk, s, config))
    results.append(CheckResult(
        name=f"scaling property ({label}, s in {{0.5, 2, -3}})",
        passed=worst_scale <= 1e-9,
        detail=f"max log-mag err {worst_scale:.3e} <= 1e-9",
    ))

    worst_shift = 0.0
    for n_fft in (16, 64):
        frame_cfg = spectral.StftConfig(n_fft=n_fft, hop=n_fft // 4, window="rectangular",
                                        center=False)
        frame = signal[:n_fft] if label != "synthetic" else rng.standard_normal(n_fft)
        for tau in (1, 5, n_fft // 2):
            worst_shift = max(
                worst_shift, spectral.verify_shifting(frame, tau, frame_cfg)
            )
    results.append(CheckResult(
        name="circular shift theorem (N in {16, 64}, tau in {1, 5, N/2})",
        passed=worst_shift <= 1e-6,
        detail=f"max phase err {worst_shift:.3e} rad <= 1e-6",
    ))

    windowed = spectral.windowed_shift_error(chunk, 3, config)
    results.append(CheckResult(
        name="windowed linear-shift ramp error (reported, no bound)",
        passed=True,
        detail=f"median wrapped err {windowed:.3e} rad",
    ))
    return results


# ---------------------------------------------------------------------------
# gradient suite


def gradient_checks(seed: int = 0, n_models: int = 20, step: float = 1e-6,
                    bound: float = 1e-4) -> list[CheckResult]:
    """Analytic gradients against central finite differences on random models."""
    rng = np.random.default_rng(seed)
    worst_overall = 0.0
    for _ in range(n_models):
        dim = int(rng.integers(2, 5))
        cond_dim = int(rng.integers(0, 3))
        temb = int(rng.choice([1, 2, 4]))
        depth = int(rng.integers(1, 3))
        hidden = tuple(int(rng.integers(3, 7)) for _ in range(depth))
        model = net.init_model(dim, cond_dim, hidden, temb, rng=rng)
        x_t = rng.standard_normal(dim)
        t = float(rng.uniform())
        cond = rng.standard_normal(cond_dim) if cond_dim else None
        target = rng.standard_normal(dim)

        def loss_fn(m, x_t=x_t, t=t, cond=cond, target=target):
            return flow.cfm_loss(net.forward(m, x_t, t, cond), target)

        predicted = net.forward(model, x_t, t, cond)
        analytic = net.backward(model, x_t, t, cond, flow.cfm_loss_grad(predicted, target))
        fd_w, fd_b = finite_difference_grads(loss_fn, model, step=step)
        for ga, gn in zip((*analytic.weights, *analytic.biases), (*fd_w, *fd_b)):
            denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-8)
            worst_overall = max(worst_overall, float(np.max(np.abs(ga - gn) / denom)))
    return [CheckResult(
        name=f"gradient check ({n_models} random models, central differences)",
        passed=worst_overall < bound,
        detail=f"worst rel err {worst_overall:.3e} < {bound:.0e}",
    )]


# ---------------------------------------------------------------------------
# calibration suite


def vcs_checks(seed: int = 0, cases: int = 200, dim: int = 8) -> list[CheckResult]:
    """Norm preservation, orthogonality, idempotence, and the degenerate guard."""
    rng = np.random.default_rng(seed)
    worst_norm = worst_ortho = worst_idem = 0.0
    guard_ok = True
    for _ in range(cases):
        line = _random_line(rng, dim)
        v = rng.standard_normal(dim)
        out = sampler.vcs_calibrate(v, line)
        v_norm = np.linalg.norm(v)
        worst_norm = max(worst_norm, abs(np.linalg.norm(out) - v_norm) / v_norm)
        worst_ortho = max(
            worst_ortho,
            abs(float(line.direction @ out))
            / (np.linalg.norm(line.direction) * v_norm),
        )
        worst_idem = max(worst_idem, rel_err(sampler.vcs_calibrate(out, line), out))
        parallel = rng.uniform(0.5, 2.0) * line.direction
        guarded = sampler.vcs_calibrate(parallel, line)
        guard_ok = guard_ok and np.array_equal(guarded, parallel)
    return [
        CheckResult(
            name=f"calibration norm preservation ({cases} cases)",
            passed=worst_norm <= 1e-10,
            detail=f"worst rel err {worst_norm:.3e} <= 1e-10",
        ),
        CheckResult(
            name=f"calibration orthogonality ({cases} cases)",
            passed=worst_ortho <= 1e-10,
            detail=f"worst |a.v'|/(|a||v|) {worst_ortho:.3e} <= 1e-10",
        ),
        CheckResult(
            name=f"calibration idempotence ({cases} cases)",
            passed=worst_idem <= 1e-10,
            detail=f"worst rel err {worst_idem:.3e} <= 1e-10",
        ),
        CheckResult(
            name="degenerate guard returns input unchanged",
            passed=guard_ok,
            detail="parallel vectors pass through bitwise",
        ),
    ]
