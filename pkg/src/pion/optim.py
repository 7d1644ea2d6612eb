"""The spectrum-preserving optimizer family and its baselines.

Every variant updates a weight matrix by left and right near-orthogonal
factors built from the skew generators of :func:`pion.manifold.lie_gradients`,
so the singular values of the weight are (approximately, exactly under the
Cayley scheme) invariant across steps.  The variants differ in where the
first and second moments live:

* ``lie`` momentum accumulates the generators themselves on both sides and
  conditions them elementwise by their own second moments;
* ``ambient`` momentum accumulates the raw gradient in weight space and
  projects the conditioned average;
* ``transported_ambient`` additionally carries the ambient momentum into
  the new frame by the same factors applied to the weight.

Alternating mode applies only one side per step (odd steps take the input
side) while still accumulating moments on both sides.  RMS scaling picks a
per-weight coefficient alpha so the first-order update norm is
``c * sqrt(d_out * d_in)`` regardless of the weight's size.

Baselines (SGD with momentum, AdamW, and a minimal Muon) and a FLOP cost
model for the update rule live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError, StateError
from .linalg import (
    Matrix,
    _check_2d,
    exp_cayley,
    exp_e2,
    exp_taylor,
    frobenius_norm,
    newton_schulz_orthogonalize,
    spectral_norm,
)
from .manifold import (
    DEFAULT_EPS,
    LiePair,
    SpectrumRef,
    capture_spectrum,
    lie_gradients,
    rms_alpha,
    stationarity_measure,
)

EXP_SCHEMES = ("taylor", "cayley", "e2")
MOMENTUM_SCHEMES = ("none", "lie", "ambient", "transported_ambient")
SECOND_MOMENTS = ("none", "lie", "ambient")
UPDATE_MODES = ("bilateral", "alternating")
MUP_MODES = ("none", "spectral_normalize", "orthogonalize")


@dataclass(frozen=True)
class PionConfig:
    """Hyperparameters and variant switches for one optimizer instance.

    ``mup_mode="orthogonalize"`` disables RMS scaling and applies the fixed
    ``mup_fixed_alpha`` instead, since orthogonalized generators already
    carry unit spectral scale.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.95
    rms_c: float = 0.2
    eps: float = DEFAULT_EPS
    exp_scheme: str = "e2"
    taylor_order: int = 12
    momentum_scheme: str = "lie"
    second_moment: str = "lie"
    update_mode: str = "bilateral"
    alternating_period: int = 1
    mup_mode: str = "none"
    mup_target: float = 1.0
    mup_ns_iters: int = 5
    mup_fixed_alpha: float = 10.0
    rms_enabled: bool = True
    bias_correction: bool = False

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigError(f"beta1 must be in [0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ConfigError(f"beta2 must be in [0, 1), got {self.beta2}")
        if self.rms_c <= 0.0:
            raise ConfigError(f"rms_c must be positive, got {self.rms_c}")
        if self.eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.exp_scheme not in EXP_SCHEMES:
            raise ConfigError(f"unknown exp_scheme {self.exp_scheme!r}")
        if self.exp_scheme == "taylor" and self.taylor_order < 1:
            raise ConfigError(f"taylor_order must be >= 1, got {self.taylor_order}")
        if self.momentum_scheme not in MOMENTUM_SCHEMES:
            raise ConfigError(f"unknown momentum_scheme {self.momentum_scheme!r}")
        if self.second_moment not in SECOND_MOMENTS:
            raise ConfigError(f"unknown second_moment {self.second_moment!r}")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError(f"unknown update_mode {self.update_mode!r}")
        if self.alternating_period < 1:
            raise ConfigError(
                f"alternating_period must be >= 1, got {self.alternating_period}"
            )
        if self.mup_mode not in MUP_MODES:
            raise ConfigError(f"unknown mup_mode {self.mup_mode!r}")
        if self.mup_target <= 0.0 or self.mup_fixed_alpha <= 0.0:
            raise ConfigError("mup_target and mup_fixed_alpha must be positive")
        if self.mup_ns_iters < 1:
            raise ConfigError(f"mup_ns_iters must be >= 1, got {self.mup_ns_iters}")
        if self.momentum_scheme == "lie" and self.second_moment == "ambient":
            raise ConfigError("lie momentum pairs with second_moment none or lie")
        if (
            self.momentum_scheme in ("ambient", "transported_ambient")
            and self.second_moment == "lie"
        ):
            raise ConfigError(
                "ambient momentum pairs with second_moment none or ambient"
            )
        if self.momentum_scheme == "none" and self.second_moment != "none":
            raise ConfigError("second moments require a momentum scheme")
        if self.momentum_scheme == "none" and self.update_mode != "bilateral":
            raise ConfigError("the stateless update has no step parity to alternate on")
        if self.mup_mode == "orthogonalize" and self.rms_enabled:
            # Orthogonalized generators replace RMS control by construction.
            object.__setattr__(self, "rms_enabled", False)


@dataclass
class ParamState:
    """Per-weight optimizer state.

    Buffers exist only for the schemes that use them and start at zero.
    The Lie first moments stay skew-symmetric for the life of the state.
    """

    step: int = 0
    m_in: Matrix | None = None
    v_in: Matrix | None = None
    m_out: Matrix | None = None
    v_out: Matrix | None = None
    m: Matrix | None = None
    v: Matrix | None = None
    spectrum_ref: SpectrumRef | None = None


@dataclass(frozen=True)
class StepReport:
    """Diagnostics of a single step."""

    alpha: float
    delta_w_fro_over_eta: float
    stationarity: float
    side_taken: str  # "in", "out", or "both"


def pion_init(d_out: int, d_in: int, w0: Matrix, config: PionConfig) -> ParamState:
    """Zero-initialized state of the right shapes, plus the spectrum reference."""
    w0 = _check_2d(w0, "initial weight")
    if w0.shape != (d_out, d_in):
        raise ShapeError(f"w0 has shape {w0.shape}, expected {(d_out, d_in)}")
    state = ParamState(spectrum_ref=capture_spectrum(w0))
    if config.momentum_scheme == "lie":
        state.m_in = np.zeros((d_in, d_in))
        state.m_out = np.zeros((d_out, d_out))
        if config.second_moment == "lie":
            state.v_in = np.zeros((d_in, d_in))
            state.v_out = np.zeros((d_out, d_out))
    elif config.momentum_scheme in ("ambient", "transported_ambient"):
        state.m = np.zeros((d_out, d_in))
        if config.second_moment == "ambient":
            state.v = np.zeros((d_out, d_in))
    return state


def _exp_factor(a: Matrix, s: float, config: PionConfig) -> Matrix:
    """One orthogonal factor approximating exp(s * A)."""
    if config.exp_scheme == "e2":
        return exp_e2(a, s)
    if config.exp_scheme == "cayley":
        return exp_cayley(s * a)
    return exp_taylor(s * a, config.taylor_order)


def _side_for_step(t: int, period: int) -> str:
    """Alternation side for 1-based step t: odd blocks take the input side."""
    return "in" if ((t - 1) // period) % 2 == 0 else "out"


def _effective_alpha(w: Matrix, a_in, a_out, config: PionConfig) -> float:
    if config.mup_mode == "orthogonalize":
        return config.mup_fixed_alpha
    if config.rms_enabled:
        return rms_alpha(w, a_in, a_out, config.rms_c, config.eps)
    return 1.0


def apply_mup(lp: LiePair, config: PionConfig) -> LiePair:
    """Condition both generators so their spectral scale is width-free.

    ``spectral_normalize`` rescales each side to spectral norm
    ``mup_target`` (a positive scalar, so the direction is untouched);
    ``orthogonalize`` pushes each side's nonzero singular values toward one
    with Newton-Schulz, which preserves skewness because the iteration is
    an odd polynomial.  Zero sides pass through.
    """
    if config.mup_mode == "none":
        raise ConfigError("apply_mup called with mup_mode='none'")

    def one_side(s: Matrix) -> Matrix:
        if not np.any(s):
            return s
        if config.mup_mode == "spectral_normalize":
            return s * (config.mup_target / spectral_norm(s))
        return newton_schulz_orthogonalize(s, config.mup_ns_iters)

    return replace(lp, g_in=one_side(lp.g_in), g_out=one_side(lp.g_out))


def pion_step_raw(
    w: Matrix, g: Matrix, config: PionConfig
) -> tuple[Matrix, StepReport]:
    """One stateless bilateral step W' = E(-lr G_out) W E(-lr G_in).

    No moments are consulted; with RMS enabled a shared alpha scales both
    exponents.
    """
    pair = lie_gradients(w, g)
    stationarity = float(np.sum(pair.g_in**2) + np.sum(pair.g_out**2))
    a_in, a_out = -pair.g_in, -pair.g_out
    alpha = _effective_alpha(w, a_in, a_out, config)
    s = config.lr * alpha
    w_next = _exp_factor(a_out, s, config) @ w @ _exp_factor(a_in, s, config)
    report = StepReport(
        alpha=alpha,
        delta_w_fro_over_eta=frobenius_norm(w_next - w) / config.lr,
        stationarity=stationarity,
        side_taken="both",
    )
    return w_next, report


def _check_state(config: PionConfig, state: ParamState, lie: bool) -> None:
    if lie:
        if state.m_in is None or state.m_out is None:
            raise StateError("state was not initialized for lie momentum")
        if config.second_moment == "lie" and (state.v_in is None or state.v_out is None):
            raise StateError("state lacks lie second-moment buffers")
    else:
        if state.m is None:
            raise StateError("state was not initialized for ambient momentum")
        if config.second_moment == "ambient" and state.v is None:
            raise StateError("state lacks the ambient second-moment buffer")


def pion_step_lie(
    w: Matrix, g: Matrix, state: ParamState, config: PionConfig
) -> tuple[Matrix, StepReport]:
    """One step with Lie-algebra moments.

    Both sides' moments are refreshed every step; under alternation only
    the weight update itself is one-sided.  The conditioned direction is
    A = -m / (sqrt(v) + eps), or A = -m without second moments.
    """
    if config.momentum_scheme != "lie":
        raise StateError(f"lie stepper with momentum_scheme={config.momentum_scheme!r}")
    _check_state(config, state, lie=True)
    t = state.step + 1
    pair = lie_gradients(w, g)
    stationarity = float(np.sum(pair.g_in**2) + np.sum(pair.g_out**2))
    if config.mup_mode != "none":
        pair = apply_mup(pair, config)

    b1, b2 = config.beta1, config.beta2
    state.m_in = b1 * state.m_in + (1.0 - b1) * pair.g_in
    state.m_out = b1 * state.m_out + (1.0 - b1) * pair.g_out
    m_in, m_out = state.m_in, state.m_out
    if config.bias_correction:
        corr = 1.0 - b1**t
        m_in, m_out = m_in / corr, m_out / corr
    if config.second_moment == "lie":
        state.v_in = b2 * state.v_in + (1.0 - b2) * pair.g_in * pair.g_in
        state.v_out = b2 * state.v_out + (1.0 - b2) * pair.g_out * pair.g_out
        v_in, v_out = state.v_in, state.v_out
        if config.bias_correction:
            corr = 1.0 - b2**t
            v_in, v_out = v_in / corr, v_out / corr
        a_in = -m_in / (np.sqrt(v_in) + config.eps)
        a_out = -m_out / (np.sqrt(v_out) + config.eps)
    else:
        a_in, a_out = -m_in, -m_out

    if config.update_mode == "alternating":
        side = _side_for_step(t, config.alternating_period)
        if side == "out":
            alpha = _effective_alpha(w, None, a_out, config)
            w_next = _exp_factor(a_out, config.lr * alpha, config) @ w
        else:
            alpha = _effective_alpha(w, a_in, None, config)
            w_next = w @ _exp_factor(a_in, config.lr * alpha, config)
    else:
        side = "both"
        alpha = _effective_alpha(w, a_in, a_out, config)
        s = config.lr * alpha
        w_next = _exp_factor(a_out, s, config) @ w @ _exp_factor(a_in, s, config)

    state.step = t
    report = StepReport(
        alpha=alpha,
        delta_w_fro_over_eta=frobenius_norm(w_next - w) / config.lr,
        stationarity=stationarity,
        side_taken=side,
    )
    return w_next, report


def pion_step_transported(
    w: Matrix, g: Matrix, state: ParamState, config: PionConfig
) -> tuple[Matrix, StepReport]:
    """One step with ambient momentum, optionally parallel-transported.

    The ambient second moment averages the squared momentum (not the raw
    gradient); the conditioned average is projected to the generators and
    applied.  In ``transported_ambient`` mode the momentum buffer is then
    carried by the same factors that moved the weight, so it lives in the
    new tangent frame; plain ``ambient`` mode skips the transport.
    """
    if config.momentum_scheme not in ("ambient", "transported_ambient"):
        raise StateError(
            f"ambient stepper with momentum_scheme={config.momentum_scheme!r}"
        )
    _check_state(config, state, lie=False)
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    state.m = b1 * state.m + (1.0 - b1) * g
    m = state.m
    if config.bias_correction:
        m = m / (1.0 - b1**t)
    if config.second_moment == "ambient":
        state.v = b2 * state.v + (1.0 - b2) * state.m * state.m
        v = state.v
        if config.bias_correction:
            v = v / (1.0 - b2**t)
        g_tilde = m / (np.sqrt(v) + config.eps)
    else:
        g_tilde = m

    stationarity = stationarity_measure(w, g)
    pair = lie_gradients(w, g_tilde)
    if config.mup_mode != "none":
        pair = apply_mup(pair, config)
    a_in, a_out = -pair.g_in, -pair.g_out
    transport = config.momentum_scheme == "transported_ambient"

    if config.update_mode == "alternating":
        side = _side_for_step(t, config.alternating_period)
        if side == "in":
            alpha = _effective_alpha(w, a_in, None, config)
            factor = _exp_factor(a_in, config.lr * alpha, config)
            w_next = w @ factor
            if transport:
                state.m = state.m @ factor
        else:
            alpha = _effective_alpha(w, None, a_out, config)
            factor = _exp_factor(a_out, config.lr * alpha, config)
            w_next = factor @ w
            if transport:
                state.m = factor @ state.m
    else:
        side = "both"
        alpha = _effective_alpha(w, a_in, a_out, config)
        s = config.lr * alpha
        left = _exp_factor(a_out, s, config)
        right = _exp_factor(a_in, s, config)
        w_next = left @ w @ right
        if transport:
            state.m = left @ state.m @ right

    state.step = t
    report = StepReport(
        alpha=alpha,
        delta_w_fro_over_eta=frobenius_norm(w_next - w) / config.lr,
        stationarity=stationarity,
        side_taken=side,
    )
    return w_next, report


def pion_step(
    w: Matrix, g: Matrix, state: ParamState, config: PionConfig
) -> tuple[Matrix, StepReport]:
    """Dispatch one step according to the configured momentum scheme."""
    if config.momentum_scheme == "lie":
        return pion_step_lie(w, g, state, config)
    if config.momentum_scheme in ("ambient", "transported_ambient"):
        return pion_step_transported(w, g, state, config)
    w_next, report = pion_step_raw(w, g, config)
    state.step += 1
    return w_next, report


# ---------------------------------------------------------------------------
# Baselines


@dataclass(frozen=True)
class BaselineConfig:
    """Hyperparameters for the comparison optimizers."""

    kind: str  # "sgd", "adamw", or "muon"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = DEFAULT_EPS
    weight_decay: float = 0.0
    ns_iters: int = 5

    def __post_init__(self):
        if self.kind not in ("sgd", "adamw", "muon"):
            raise ConfigError(f"unknown baseline kind {self.kind!r}")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigError("momentum coefficients must lie in [0, 1)")
        if self.eps <= 0.0 or self.weight_decay < 0.0:
            raise ConfigError("eps must be positive and weight_decay non-negative")


@dataclass
class BaselineState:
    step: int = 0
    m: Matrix | None = None
    v: Matrix | None = None


def baseline_init(d_out: int, d_in: int, hyper: BaselineConfig) -> BaselineState:
    state = BaselineState(m=np.zeros((d_out, d_in)))
    if hyper.kind == "adamw":
        state.v = np.zeros((d_out, d_in))
    return state


def sgd_step(
    w: Matrix, g: Matrix, state: BaselineState, hyper: BaselineConfig
) -> Matrix:
    """Heavy-ball SGD: m <- beta m + g, W <- W - lr m."""
    if w.shape != g.shape:
        raise ShapeError(f"weight {w.shape} vs gradient {g.shape}")
    state.step += 1
    state.m = hyper.beta1 * state.m + g
    return w - hyper.lr * state.m


def adamw_step(
    w: Matrix, g: Matrix, state: BaselineState, hyper: BaselineConfig
) -> Matrix:
    """AdamW with bias correction and decoupled weight decay."""
    if w.shape != g.shape:
        raise ShapeError(f"weight {w.shape} vs gradient {g.shape}")
    state.step += 1
    t = state.step
    state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
    state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g * g
    m_hat = state.m / (1.0 - hyper.beta1**t)
    v_hat = state.v / (1.0 - hyper.beta2**t)
    w = w * (1.0 - hyper.lr * hyper.weight_decay)
    return w - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)


def muon_lite_step(
    w: Matrix, g: Matrix, state: BaselineState, hyper: BaselineConfig
) -> Matrix:
    """Minimal Muon: orthogonalize the momentum, scale by sqrt(d_out/d_in)."""
    if w.shape != g.shape:
        raise ShapeError(f"weight {w.shape} vs gradient {g.shape}")
    state.step += 1
    state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
    if not np.any(state.m):
        return w.copy()
    d_out, d_in = w.shape
    update = newton_schulz_orthogonalize(state.m, hyper.ns_iters)
    return w - hyper.lr * np.sqrt(d_out / d_in) * update


def baseline_step(
    w: Matrix, g: Matrix, state: BaselineState, hyper: BaselineConfig
) -> Matrix:
    if hyper.kind == "sgd":
        return sgd_step(w, g, state, hyper)
    if hyper.kind == "adamw":
        return adamw_step(w, g, state, hyper)
    return muon_lite_step(w, g, state, hyper)


# ---------------------------------------------------------------------------
# Cost model


@dataclass(frozen=True)
class FlopEstimate:
    """Closed-form FLOP counts for one update of a d_out x d_in weight."""

    d_out: int
    d_in: int
    batch_tokens: int
    lie_gradient: float
    rms_scaling: float
    update_apply: float
    update_side_dominant: float
    total: float
    relative_overhead: float


def flop_estimate(
    d_out: int, d_in: int, batch_tokens: int, config: PionConfig
) -> FlopEstimate:
    """FLOPs of one optimizer step against a B x d_out x d_in forward-backward.

    Building both generators costs 4 d_out d_in^2 + 4 d_out^2 d_in and is
    paid every step (moments accumulate on both sides even when the update
    alternates).  RMS scaling and applying the second-order factors each
    cost 2 d_out^2 d_in + 2 d_out d_in^2, the latter plus d_out^3 + d_in^3
    for the squared generators; alternation halves those update-side terms.
    """
    if d_out < 1 or d_in < 1 or batch_tokens < 1:
        raise ConfigError("dimensions and batch_tokens must be positive")
    do, di = float(d_out), float(d_in)
    cross = 2.0 * do * do * di + 2.0 * do * di * di
    lie = 4.0 * do * di * di + 4.0 * do * do * di
    rms = cross if config.rms_enabled else 0.0
    apply_cost = cross + do**3 + di**3
    if config.update_mode == "alternating":
        rms *= 0.5
        apply_cost *= 0.5
    total = lie + rms + apply_cost
    return FlopEstimate(
        d_out=d_out,
        d_in=d_in,
        batch_tokens=batch_tokens,
        lie_gradient=lie,
        rms_scaling=rms,
        update_apply=apply_cost,
        update_side_dominant=rms + apply_cost,
        total=total,
        relative_overhead=total / (batch_tokens * do * di),
    )
