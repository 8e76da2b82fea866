"""Optimizers over flat float64 parameter vectors.

The family centers on :class:`AdEMAMix`, which extends AdamW's first moment
with a second, slow-decaying gradient EMA. The update numerator becomes
``m1_hat + alpha * m2`` where ``m1`` is the usual bias-corrected fast EMA and
``m2`` is a long-memory EMA that is deliberately *not* bias-corrected, so it
fills up slowly from zero. With ``alpha == 0`` every step is exactly an AdamW
step, bit for bit.

Step functions take the current learning rate (and, for the mixture
optimizers, the warmed-up ``alpha``/slow-decay values) from the caller;
optimizers never own schedule state. That keeps mid-training optimizer
switches and checkpoint resume trivially correct: all schedule clocks are
derived from the step counter carried in the state.

Baselines kept for comparison: :class:`Lion` (sign updates), :class:`AdMetaS`
(nested EMAs), :class:`AggMo` (K plain momentum buffers), and
:class:`Ad3EMAMix` (a third EMA added to the mixture).
"""

from __future__ import annotations

import numpy as np

from .numerics import DivergenceError, check_same_length, zeros


def _check_finite(step_index: int, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if arr is not None and not np.all(np.isfinite(arr)):
            raise DivergenceError(
                f"non-finite value after update step {step_index}", step=step_index
            )


class AdamW:
    """Adam with decoupled weight decay.

    m   <- b1*m + (1-b1)*g          m_hat  = m / (1 - b1^t)
    nu  <- b2*nu + (1-b2)*g^2       nu_hat = nu / (1 - b2^t)
    theta <- theta - lr*(m_hat / (sqrt(nu_hat) + eps) + wd*theta)
    """

    variant = "adamw"

    def __init__(self, dim, *, beta1=0.9, beta2=0.999, weight_decay=0.0, eps=1e-8):
        if not 0.0 <= beta1 < 1.0:
            raise ValueError(f"beta1 must be in [0, 1), got {beta1}")
        if not 0.0 <= beta2 < 1.0:
            raise ValueError(f"beta2 must be in [0, 1), got {beta2}")
        self.dim = int(dim)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.weight_decay = float(weight_decay)
        self.eps = float(eps)
        self.t = 0
        self.m = zeros(self.dim)
        self.nu = zeros(self.dim)

    @np.errstate(over="ignore", invalid="ignore")
    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        check_same_length(theta, grad)
        self.t += 1
        t = self.t
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.nu = self.beta2 * self.nu + (1.0 - self.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - self.beta1**t)
        nu_hat = self.nu / (1.0 - self.beta2**t)
        num = m_hat
        new_theta = theta - lr * (num / (np.sqrt(nu_hat) + self.eps) + self.weight_decay * theta)
        _check_finite(t, new_theta, self.m, self.nu)
        return new_theta

    def state_slots(self):
        return {"m": self.m, "nu": self.nu}

    def hyper(self):
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "weight_decay": self.weight_decay,
            "eps": self.eps,
        }


class AdEMAMix:
    """Two-EMA mixture optimizer.

    Same as AdamW plus a slow EMA ``m2 <- b3*m2 + (1-b3)*g`` (no bias
    correction) feeding the numerator ``m1_hat + alpha*m2``. ``alpha`` and the
    slow decay are typically warmed up by the caller over ``t_alpha`` /
    ``t_beta3`` steps; the final values live here so the warmup horizon is
    part of the optimizer state.

    With ``beta1 == 0`` the fast EMA equals the raw gradient, so no ``m1``
    buffer is allocated and the memory footprint matches AdamW. Pass
    ``with_m1_buffer=True`` to force allocation anyway (the updates are
    identical either way).

    ``sched_offset`` shifts the warmup clock: a state created by switching
    from AdamW mid-run restarts its alpha/beta3 warmups at the switch point
    while bias correction keeps counting from the global step.
    """

    variant = "ademamix"

    def __init__(
        self,
        dim,
        *,
        beta1=0.9,
        beta2=0.999,
        beta3=0.9999,
        alpha=5.0,
        weight_decay=0.0,
        eps=1e-8,
        t_alpha=0,
        t_beta3=0,
        beta_start=None,
        with_m1_buffer=None,
    ):
        if not 0.0 <= beta1 < 1.0:
            raise ValueError(f"beta1 must be in [0, 1), got {beta1}")
        if not 0.0 <= beta2 < 1.0:
            raise ValueError(f"beta2 must be in [0, 1), got {beta2}")
        if not 0.0 <= beta3 < 1.0:
            raise ValueError(f"beta3 must be in [0, 1), got {beta3}")
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.dim = int(dim)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.beta3 = float(beta3)
        self.alpha = float(alpha)
        self.weight_decay = float(weight_decay)
        self.eps = float(eps)
        self.t_alpha = int(t_alpha)
        self.t_beta3 = int(t_beta3)
        self.beta_start = float(beta1 if beta_start is None else beta_start)
        if with_m1_buffer is None:
            with_m1_buffer = self.beta1 != 0.0
        if self.beta1 != 0.0 and not with_m1_buffer:
            raise ValueError("the fast-EMA buffer can only be dropped when beta1 == 0")
        self.t = 0
        self.sched_offset = 0
        self.m1 = zeros(self.dim) if with_m1_buffer else None
        self.m2 = zeros(self.dim)
        self.nu = zeros(self.dim)

    @np.errstate(over="ignore", invalid="ignore")
    def step(
        self,
        theta: np.ndarray,
        grad: np.ndarray,
        lr: float,
        alpha_t: float | None = None,
        beta3_t: float | None = None,
    ) -> np.ndarray:
        """One update; ``alpha_t``/``beta3_t`` default to the final values."""
        check_same_length(theta, grad)
        if alpha_t is None:
            alpha_t = self.alpha
        if beta3_t is None:
            beta3_t = self.beta3
        self.t += 1
        t = self.t
        if self.m1 is None:
            m1_hat = grad
        else:
            self.m1 = self.beta1 * self.m1 + (1.0 - self.beta1) * grad
            m1_hat = self.m1 / (1.0 - self.beta1**t)
        self.m2 = beta3_t * self.m2 + (1.0 - beta3_t) * grad
        self.nu = self.beta2 * self.nu + (1.0 - self.beta2) * (grad * grad)
        nu_hat = self.nu / (1.0 - self.beta2**t)
        # alpha == 0 must reduce to AdamW exactly, so skip the m2 term entirely
        num = m1_hat if alpha_t == 0.0 else m1_hat + alpha_t * self.m2
        new_theta = theta - lr * (num / (np.sqrt(nu_hat) + self.eps) + self.weight_decay * theta)
        _check_finite(t, new_theta, self.m1, self.m2, self.nu)
        return new_theta

    @np.errstate(over="ignore", invalid="ignore")
    def step_convex(
        self,
        theta: np.ndarray,
        grad: np.ndarray,
        eta_hat: float,
        alpha_hat: float,
        beta3_t: float | None = None,
    ) -> np.ndarray:
        """Convex-combination form: numerator ``(1-a)*m1_hat + a*m2``.

        With static hyperparameters, ``eta_hat = lr*(alpha+1)`` and
        ``alpha_hat = alpha/(alpha+1)`` reproduces :meth:`step` up to
        rounding. Once schedules move ``lr`` and ``alpha`` per step the two
        forms are no longer reparametrizations of each other.
        """
        check_same_length(theta, grad)
        if not 0.0 <= alpha_hat <= 1.0:
            raise ValueError(f"alpha_hat must be in [0, 1], got {alpha_hat}")
        if beta3_t is None:
            beta3_t = self.beta3
        self.t += 1
        t = self.t
        if self.m1 is None:
            m1_hat = grad
        else:
            self.m1 = self.beta1 * self.m1 + (1.0 - self.beta1) * grad
            m1_hat = self.m1 / (1.0 - self.beta1**t)
        self.m2 = beta3_t * self.m2 + (1.0 - beta3_t) * grad
        self.nu = self.beta2 * self.nu + (1.0 - self.beta2) * (grad * grad)
        nu_hat = self.nu / (1.0 - self.beta2**t)
        num = (1.0 - alpha_hat) * m1_hat + alpha_hat * self.m2
        new_theta = theta - eta_hat * (
            num / (np.sqrt(nu_hat) + self.eps) + self.weight_decay * theta
        )
        _check_finite(t, new_theta, self.m1, self.m2, self.nu)
        return new_theta

    def state_slots(self):
        slots = {"m2": self.m2, "nu": self.nu}
        if self.m1 is not None:
            slots["m1"] = self.m1
        return slots

    def hyper(self):
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "beta3": self.beta3,
            "alpha": self.alpha,
            "weight_decay": self.weight_decay,
            "eps": self.eps,
            "t_alpha": self.t_alpha,
            "t_beta3": self.t_beta3,
            "beta_start": self.beta_start,
            "sched_offset": self.sched_offset,
        }


class Lion:
    """Sign-based optimizer with a single momentum buffer.

    The update direction is ``sign(alpha*m + (1-alpha)*g)`` computed from the
    *previous* momentum; the EMA is refreshed only afterwards. Before weight
    decay every update coordinate is exactly -lr, 0, or +lr.
    """

    variant = "lion"

    def __init__(self, dim, *, alpha=0.9, beta=0.99, weight_decay=0.0):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        if not 0.0 <= beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {beta}")
        self.dim = int(dim)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self.m = zeros(self.dim)

    @np.errstate(over="ignore", invalid="ignore")
    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        check_same_length(theta, grad)
        self.t += 1
        direction = np.sign(self.alpha * self.m + (1.0 - self.alpha) * grad)
        new_theta = theta - lr * (direction + self.weight_decay * theta)
        self.m = self.beta * self.m + (1.0 - self.beta) * grad
        _check_finite(self.t, new_theta, self.m)
        return new_theta

    def state_slots(self):
        return {"m": self.m}

    def hyper(self):
        return {"alpha": self.alpha, "beta": self.beta, "weight_decay": self.weight_decay}


class AdMetaS:
    """Nested-EMA baseline.

    m1 <- b1*m1 + g;  h = kappa*g + mu*m1;  m2 <- b2*m2 + (1-b2)*h;
    theta <- theta - lr*m2, with mu and kappa tied to b1:
    mu = 25 - 10*(b1 + 1/b1), kappa = 10/b1 - 9. They are recomputed on
    access, never stored.
    """

    variant = "admeta_s"

    def __init__(self, dim, *, beta1=0.9, beta2=0.3):
        if not 0.0 < beta1 < 1.0:
            raise ValueError(f"beta1 must be in (0, 1), got {beta1}")
        if not 0.0 <= beta2 < 1.0:
            raise ValueError(f"beta2 must be in [0, 1), got {beta2}")
        self.dim = int(dim)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.t = 0
        self.m1 = zeros(self.dim)
        self.m2 = zeros(self.dim)

    @property
    def mu(self) -> float:
        return 25.0 - 10.0 * (self.beta1 + 1.0 / self.beta1)

    @property
    def kappa(self) -> float:
        return 10.0 / self.beta1 - 9.0

    @np.errstate(over="ignore", invalid="ignore")
    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        check_same_length(theta, grad)
        self.t += 1
        self.m1 = self.beta1 * self.m1 + grad
        h = self.kappa * grad + self.mu * self.m1
        self.m2 = self.beta2 * self.m2 + (1.0 - self.beta2) * h
        new_theta = theta - lr * self.m2
        _check_finite(self.t, new_theta, self.m1, self.m2)
        return new_theta

    def state_slots(self):
        return {"m1": self.m1, "m2": self.m2}

    def hyper(self):
        return {"beta1": self.beta1, "beta2": self.beta2}


class AggMo:
    """Aggregated momentum: K buffers ``m_i <- b_i*m_i + g`` (note: raw g,
    no (1-b) factor), update is the average ``theta - (lr/K)*sum(m_i)``."""

    variant = "aggmo"

    def __init__(self, dim, *, betas=(0.0, 0.9, 0.99)):
        betas = tuple(float(b) for b in betas)
        if len(betas) < 1:
            raise ValueError("need at least one momentum coefficient")
        for b in betas:
            if not 0.0 <= b < 1.0:
                raise ValueError(f"momentum coefficients must be in [0, 1), got {b}")
        self.dim = int(dim)
        self.betas = betas
        self.t = 0
        self.m = [zeros(self.dim) for _ in betas]

    @np.errstate(over="ignore", invalid="ignore")
    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        check_same_length(theta, grad)
        self.t += 1
        total = zeros(self.dim)
        for i, b in enumerate(self.betas):
            self.m[i] = b * self.m[i] + grad
            total += self.m[i]
        new_theta = theta - (lr / len(self.betas)) * total
        _check_finite(self.t, new_theta, *self.m)
        return new_theta

    def state_slots(self):
        return {f"m{i}": m for i, m in enumerate(self.m)}

    def hyper(self):
        return {"betas": ",".join(repr(b) for b in self.betas)}


class Ad3EMAMix:
    """Three-EMA variant: numerator ``m1_hat + alpha*(m2 + m3)`` where ``m3``
    is a second slow EMA with decay ``beta4`` (warmed up like ``beta3``)."""

    variant = "ad3emamix"

    def __init__(
        self,
        dim,
        *,
        beta1=0.9,
        beta2=0.999,
        beta3=0.9999,
        beta4=0.9999,
        alpha=4.0,
        weight_decay=0.0,
        eps=1e-8,
        t_alpha=0,
        t_beta3=0,
        beta_start=None,
    ):
        for name, b in (("beta1", beta1), ("beta2", beta2), ("beta3", beta3), ("beta4", beta4)):
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        self.dim = int(dim)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.beta3 = float(beta3)
        self.beta4 = float(beta4)
        self.alpha = float(alpha)
        self.weight_decay = float(weight_decay)
        self.eps = float(eps)
        self.t_alpha = int(t_alpha)
        self.t_beta3 = int(t_beta3)
        self.beta_start = float(beta1 if beta_start is None else beta_start)
        self.t = 0
        self.sched_offset = 0
        self.m1 = zeros(self.dim)
        self.m2 = zeros(self.dim)
        self.m3 = zeros(self.dim)
        self.nu = zeros(self.dim)

    @np.errstate(over="ignore", invalid="ignore")
    def step(
        self,
        theta: np.ndarray,
        grad: np.ndarray,
        lr: float,
        alpha_t: float | None = None,
        beta3_t: float | None = None,
        beta4_t: float | None = None,
    ) -> np.ndarray:
        check_same_length(theta, grad)
        if alpha_t is None:
            alpha_t = self.alpha
        if beta3_t is None:
            beta3_t = self.beta3
        if beta4_t is None:
            beta4_t = self.beta4
        self.t += 1
        t = self.t
        self.m1 = self.beta1 * self.m1 + (1.0 - self.beta1) * grad
        m1_hat = self.m1 / (1.0 - self.beta1**t)
        self.m2 = beta3_t * self.m2 + (1.0 - beta3_t) * grad
        self.m3 = beta4_t * self.m3 + (1.0 - beta4_t) * grad
        self.nu = self.beta2 * self.nu + (1.0 - self.beta2) * (grad * grad)
        nu_hat = self.nu / (1.0 - self.beta2**t)
        num = m1_hat if alpha_t == 0.0 else m1_hat + alpha_t * (self.m2 + self.m3)
        new_theta = theta - lr * (num / (np.sqrt(nu_hat) + self.eps) + self.weight_decay * theta)
        _check_finite(t, new_theta, self.m1, self.m2, self.m3, self.nu)
        return new_theta

    def state_slots(self):
        return {"m1": self.m1, "m2": self.m2, "m3": self.m3, "nu": self.nu}

    def hyper(self):
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "beta3": self.beta3,
            "beta4": self.beta4,
            "alpha": self.alpha,
            "weight_decay": self.weight_decay,
            "eps": self.eps,
            "t_alpha": self.t_alpha,
            "t_beta3": self.t_beta3,
            "beta_start": self.beta_start,
            "sched_offset": self.sched_offset,
        }


def switch_to_ademamix(
    adamw: AdamW,
    *,
    beta3=0.9999,
    alpha=5.0,
    t_alpha=0,
    t_beta3=0,
    beta_start=None,
) -> AdEMAMix:
    """Convert an AdamW state mid-run into an AdEMAMix state.

    The fast EMA and second moment carry over bit-for-bit and the slow EMA
    starts at zero, so the very first post-switch update is still an AdamW
    update. The global step keeps counting (carried buffers keep their bias
    profile); only the alpha/beta3 warmup clock restarts at the switch.
    """
    opt = AdEMAMix(
        adamw.dim,
        beta1=adamw.beta1,
        beta2=adamw.beta2,
        beta3=beta3,
        alpha=alpha,
        weight_decay=adamw.weight_decay,
        eps=adamw.eps,
        t_alpha=t_alpha,
        t_beta3=t_beta3,
        beta_start=beta_start,
        with_m1_buffer=True if adamw.beta1 != 0.0 else None,
    )
    if opt.m1 is not None:
        opt.m1 = adamw.m.copy()
    opt.nu = adamw.nu.copy()
    opt.t = adamw.t
    opt.sched_offset = adamw.t
    return opt


def switch_to_adamw(adema: AdEMAMix) -> AdamW:
    """Drop the slow EMA mid-run, turning the state back into AdamW.

    ``m1`` and ``nu`` carry over; ``m2`` is discarded. The second moment is
    kept (mirror of the forward switch, which also carries it).
    """
    opt = AdamW(
        adema.dim,
        beta1=adema.beta1,
        beta2=adema.beta2,
        weight_decay=adema.weight_decay,
        eps=adema.eps,
    )
    if adema.m1 is not None:
        opt.m = adema.m1.copy()
    opt.nu = adema.nu.copy()
    opt.t = adema.t
    return opt


def preseed_momentum(opt, m_init) -> None:
    """Set every first-moment buffer to ``m_init`` (fresh states only).

    Gives the first iterate an initial "speed" while the second-moment
    estimate stays at zero. The step counter must still be 0.
    """
    m_init = np.asarray(m_init, dtype=np.float64)
    if m_init.shape != (opt.dim,):
        raise ValueError(f"preseed length {m_init.shape} does not match dim {opt.dim}")
    if opt.t != 0:
        raise ValueError("momentum can only be preseeded before the first step")
    if isinstance(opt, AdamW):
        opt.m = m_init.copy()
    elif isinstance(opt, AdEMAMix):
        if opt.m1 is not None:
            opt.m1 = m_init.copy()
        opt.m2 = m_init.copy()
    elif isinstance(opt, Ad3EMAMix):
        opt.m1 = m_init.copy()
        opt.m2 = m_init.copy()
        opt.m3 = m_init.copy()
    elif isinstance(opt, Lion):
        opt.m = m_init.copy()
    else:
        raise TypeError(f"cannot preseed momentum for {type(opt).__name__}")
