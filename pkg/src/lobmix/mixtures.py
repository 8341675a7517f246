"""Mixture-density output heads over signed tick moves.

Component 1 describes downward moves, component 2 upward moves; the
zero-truncated Poisson head adds component 3 for "no move".  A component's
distribution is over the magnitude ``|y|``.

Two-component heads have no zero component; an observed ``y = 0`` is scored
with the full mixture mass at zero, ``pi1 * p1(0) + pi2 * p2(0)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, expit, gammaln, logsumexp, xlogy

BOTH_COMPONENTS = 0
DOWN, UP, ZERO = 1, 2, 3
_EXACT_SUM_MAX = 64


class Family(str, enum.Enum):
    POISSON = "poisson"
    NEGBIN = "negbin"
    ZTP = "ztp"

    @property
    def n_components(self) -> int:
        return 3 if self is Family.ZTP else 2

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("mu", "alpha") if self is Family.NEGBIN else ("lam",)


class DomainError(ValueError):
    pass


# --------------------------------------------------------------------------
# links


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def softmax(scores, axis=-1):
    s = np.asarray(scores, dtype=float)
    return np.exp(s - logsumexp(s, axis=axis, keepdims=True))


def mixture_probs(z, W, b):
    """Softmax over per-component affine scores ``z @ W + b``."""
    return softmax(np.asarray(z) @ W + b)


def positive_link(z, W, b):
    return softplus(np.asarray(z) @ W + b)


def direction_class(y, family: Family | str):
    """Component index for a signed move; 0 marks the two-component zero case."""
    family = Family(family)
    y = np.asarray(y)
    zero = ZERO if family is Family.ZTP else BOTH_COMPONENTS
    out = np.where(y < 0, DOWN, np.where(y > 0, UP, zero))
    return int(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# component log-pmfs and their parameter derivatives


def _log_expm1(lam):
    lam = np.asarray(lam, dtype=float)
    big = lam > 30.0
    safe = np.where(big, 1.0, lam)
    return np.where(big, lam + np.log1p(-np.exp(-np.where(big, lam, 30.0))), np.log(np.expm1(safe)))


def _small_sums(n, r):
    """Exact sum_{j<n} log(r+j) and sum_{j<n} 1/(r+j) for n <= _EXACT_SUM_MAX."""
    j = np.arange(_EXACT_SUM_MAX, dtype=float)
    nn = np.minimum(n, _EXACT_SUM_MAX)[..., None]
    rj = r[..., None] + j
    mask = j < nn
    return (np.log(rj) * mask).sum(-1), (mask / rj).sum(-1)


def _lgamma_ratio(n, r, with_digamma=False):
    """log Gamma(n+r) - log Gamma(r), optionally with psi(n+r) - psi(r)."""
    n = np.asarray(n, dtype=float)
    r = np.asarray(r, dtype=float)
    n, r = np.broadcast_arrays(n, r)
    small = n <= _EXACT_SUM_MAX
    lg_s, dg_s = _small_sums(np.where(small, n, 0), r)
    lg = np.where(small, lg_s, gammaln(n + r) - gammaln(r))
    if not with_digamma:
        return lg
    dg = np.where(small, dg_s, digamma(n + r) - digamma(r))
    return lg, dg


def poisson_logpmf(n, lam):
    n = np.asarray(n, dtype=float)
    return xlogy(n, lam) - lam - gammaln(n + 1)


def ztp_logpmf(n, lam):
    n = np.asarray(n, dtype=float)
    out = xlogy(n, lam) - _log_expm1(lam) - gammaln(n + 1)
    return np.where(n >= 1, out, -np.inf)


def negbin_logpmf(n, mu, alpha):
    n = np.asarray(n, dtype=float)
    mu = np.asarray(mu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    r = 1.0 / alpha
    am = alpha * mu
    l1p = np.log1p(am)
    return (_lgamma_ratio(n, r) - gammaln(n + 1) - r * l1p
            + xlogy(n, am) - n * l1p)


def component_logpmf(family: Family | str, n, params: dict):
    family = Family(family)
    if family is Family.POISSON:
        return poisson_logpmf(n, params["lam"])
    if family is Family.ZTP:
        return ztp_logpmf(n, params["lam"])
    return negbin_logpmf(n, params["mu"], params["alpha"])


def component_pmf(family: Family | str, n: int, params: dict) -> float:
    """Scalar component pmf of a magnitude; ZTP at zero is a domain error."""
    family = Family(family)
    if family is Family.ZTP and n == 0:
        raise DomainError("zero-truncated component has no mass at 0")
    if n < 0:
        raise DomainError("magnitudes are non-negative")
    return float(np.exp(component_logpmf(family, n, params)))


def _logpmf_and_dparams(family: Family, n, params: dict):
    """log pmf and d(log pmf)/d(param) for each named parameter."""
    if family is Family.POISSON:
        lam = params["lam"]
        return poisson_logpmf(n, lam), {"lam": n / lam - 1.0}
    if family is Family.ZTP:
        lam = params["lam"]
        # 1 / (1 - e^-lam) = e^lam / (e^lam - 1)
        return ztp_logpmf(n, lam), {"lam": n / lam + 1.0 / np.expm1(-lam)}
    mu, alpha = params["mu"], params["alpha"]
    r = 1.0 / alpha
    am = alpha * mu
    l1p = np.log1p(am)
    lg, dg = _lgamma_ratio(n, r, with_digamma=True)
    lp = lg - gammaln(n + 1) - r * l1p + xlogy(n, am) - n * l1p
    d_mu = n / mu - (1.0 + n * alpha) / (1.0 + am)
    d_alpha = (-dg * r * r + l1p * r * r - mu / (alpha * (1.0 + am))
               + n / alpha - n * mu / (1.0 + am))
    return lp, {"mu": d_mu, "alpha": d_alpha}


# --------------------------------------------------------------------------
# forecasts


@dataclass(frozen=True)
class MixtureForecast:
    """Mixture probabilities and component parameters, batched on leading axes.

    ``pi[..., k-1]`` is the weight of component k; each entry of ``params``
    has trailing length 2 (components 1 and 2).
    """

    family: Family
    pi: np.ndarray
    params: dict

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "pi", np.asarray(self.pi, dtype=float))
        object.__setattr__(self, "params",
                           {k: np.asarray(v, dtype=float) for k, v in self.params.items()})
        if self.pi.shape[-1] != self.family.n_components:
            raise ValueError(f"{self.family.value} needs {self.family.n_components} weights")
        if set(self.params) != set(self.family.param_names):
            raise ValueError(f"{self.family.value} needs params {self.family.param_names}")

    @property
    def batch_shape(self) -> tuple:
        return self.pi.shape[:-1]

    def __len__(self) -> int:
        return self.pi.shape[0]

    def __getitem__(self, idx) -> "MixtureForecast":
        return MixtureForecast(self.family, self.pi[idx], {k: v[idx] for k, v in self.params.items()})

    def component(self, k: int) -> dict:
        """Parameters of component k (1 or 2)."""
        return {name: v[..., k - 1] for name, v in self.params.items()}

    def validate(self) -> None:
        if not np.allclose(self.pi.sum(-1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("mixture probabilities do not sum to 1")
        if np.any(self.pi < 0) or np.any(self.pi > 1):
            raise ValueError("mixture probabilities outside [0, 1]")
        for name, v in self.params.items():
            if not np.all(v > 0):
                raise ValueError(f"{name} must be strictly positive")

    def log_likelihood(self, y):
        return log_likelihood(y, self)

    def expected_move(self):
        return expected_move(self)

    def quantile(self, k: int, rho: float) -> int:
        """rho-quantile of component k's magnitude (single forecast only)."""
        return component_quantile(self.family, {n: float(v) for n, v in self.component(k).items()}, rho)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "pi": self.pi.tolist(),
                "params": {k: v.tolist() for k, v in self.params.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureForecast":
        return cls(Family(d["family"]), np.asarray(d["pi"]), {k: np.asarray(v) for k, v in d["params"].items()})


def log_likelihood(y, forecast: MixtureForecast):
    """Mixture log-likelihood of signed moves, vectorized over the batch."""
    fam = forecast.family
    y = np.asarray(y)
    n = np.abs(y).astype(float)
    cls = direction_class(y, fam)
    with np.errstate(divide="ignore"):
        log_pi = np.log(forecast.pi)
    lp = np.stack([component_logpmf(fam, n, forecast.component(k)) for k in (1, 2)], axis=-1)
    lp1, lp2 = lp[..., 0], lp[..., 1]
    with np.errstate(invalid="ignore"):
        out = np.where(cls == DOWN, log_pi[..., 0] + lp1, log_pi[..., 1] + lp2)
        if fam is Family.ZTP:
            out = np.where(cls == ZERO, log_pi[..., 2], out)
        else:
            both = np.logaddexp(log_pi[..., 0] + lp1, log_pi[..., 1] + lp2)
            out = np.where(cls == BOTH_COMPONENTS, both, out)
    return float(out) if np.ndim(out) == 0 else out


def expected_move(forecast: MixtureForecast):
    """Per-direction conditional mean magnitude, shape (..., 2)."""
    fam = forecast.family
    if fam is Family.POISSON:
        return forecast.params["lam"].copy()
    if fam is Family.NEGBIN:
        return forecast.params["mu"].copy()
    lam = forecast.params["lam"]
    return lam / -np.expm1(-lam)


def _component_mean(family: Family, params: dict) -> float:
    if family is Family.NEGBIN:
        return float(params["mu"])
    lam = float(params["lam"])
    return lam / -math.expm1(-lam) if family is Family.ZTP else lam


def component_quantile(family: Family | str, params: dict, rho: float) -> int:
    """Smallest integer q on the component's support with CDF(q) >= rho.

    Cumulative summation in blocks that double in length; every partial sum
    is a strict left fold so results do not depend on the block size.
    """
    family = Family(family)
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    params = {k: float(v) for k, v in params.items()}
    if any(not (v > 0 and math.isfinite(v)) for v in params.values()):
        raise DomainError("component parameters must be positive and finite")
    mean = _component_mean(family, params)
    start = 1 if family is Family.ZTP else 0
    block = max(16, int(math.ceil(mean)))
    total = 0.0
    while True:
        q = np.arange(start, start + block, dtype=float)
        pmf = np.exp(component_logpmf(family, q, params))
        cdf = np.cumsum(np.concatenate(([total], pmf)))[1:]
        hit = np.flatnonzero(cdf >= rho)
        if hit.size:
            return int(start + hit[0])
        if start + block > mean and pmf[-1] == 0.0:
            # remaining mass is below double resolution
            return int(start + block - 1)
        total = float(cdf[-1])
        start += block
        block *= 2


def sample_move(forecast: MixtureForecast, rng: np.random.Generator, size=None):
    """Draw signed moves from a single (unbatched) forecast."""
    if forecast.batch_shape:
        raise ValueError("sample_move expects a single forecast")
    fam = forecast.family
    shape = () if size is None else (size if isinstance(size, tuple) else (size,))
    k = rng.choice(fam.n_components, size=shape, p=forecast.pi / forecast.pi.sum()) + 1
    mag = np.zeros(shape, dtype=np.int64)
    for comp in (1, 2):
        sel = k == comp
        cnt = int(np.count_nonzero(sel))
        if not cnt:
            continue
        p = {name: float(v) for name, v in forecast.component(comp).items()}
        if fam is Family.POISSON:
            draws = rng.poisson(p["lam"], cnt)
        elif fam is Family.NEGBIN:
            r = 1.0 / p["alpha"]
            draws = rng.negative_binomial(r, 1.0 / (1.0 + p["alpha"] * p["mu"]), cnt)
        else:
            draws = _ztp_draws(p["lam"], cnt, rng)
        if shape:
            mag[sel] = draws
        else:
            mag = np.int64(draws[0])
    sign = np.where(k == DOWN, -1, np.where(k == UP, 1, 0))
    out = sign * mag
    return int(out) if size is None else out


def _ztp_draws(lam: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws restricted to {1, 2, ...}."""
    from scipy.stats import poisson

    p0 = math.exp(-lam)
    u = p0 + rng.random(n) * (1.0 - p0)
    out = poisson.ppf(u, lam).astype(np.int64)
    return np.maximum(out, 1)


# --------------------------------------------------------------------------
# head: affine scores on the dense output z


def head_shapes(family: Family | str, width: int) -> dict[str, tuple[int, ...]]:
    family = Family(family)
    shapes = {"pi_W": (width, family.n_components), "pi_b": (family.n_components,)}
    for name in family.param_names:
        shapes[f"{name}_W"] = (width, 2)
        shapes[f"{name}_b"] = (2,)
    return shapes


def head_scores(z, weights: dict, family: Family | str):
    family = Family(family)
    s = z @ weights["pi_W"] + weights["pi_b"]
    raw = {name: z @ weights[f"{name}_W"] + weights[f"{name}_b"] for name in family.param_names}
    return s, raw


def head_forecast(z, weights: dict, family: Family | str) -> MixtureForecast:
    family = Family(family)
    s, raw = head_scores(z, weights, family)
    return MixtureForecast(family, softmax(s), {k: softplus(v) for k, v in raw.items()})


def nll_score_gradient(y, family: Family | str, pi_scores, raw_params: dict):
    """Negative log-likelihood and its gradient w.r.t. the pre-link scores.

    Returns ``(nll, d_pi_scores, {name: d_raw})``, all batched like ``y``.
    """
    family = Family(family)
    y = np.asarray(y)
    n = np.abs(y).astype(float)
    cls = direction_class(y, family)
    lse = logsumexp(pi_scores, axis=-1, keepdims=True)
    log_pi = pi_scores - lse
    pi = np.exp(log_pi)
    params = {k: softplus(v) for k, v in raw_params.items()}
    lps, dls = [], []
    for k in (0, 1):
        comp = {name: v[..., k] for name, v in params.items()}
        lp, dl = _logpmf_and_dparams(family, n, comp)
        lps.append(lp)
        dls.append(dl)
    lp = np.stack(lps, -1)

    resp = np.zeros_like(pi)
    down, up = cls == DOWN, cls == UP
    resp[down, 0] = 1.0
    resp[up, 1] = 1.0
    with np.errstate(invalid="ignore"):
        ll = np.where(down, log_pi[..., 0] + lp[..., 0], log_pi[..., 1] + lp[..., 1])
    if family is Family.ZTP:
        zero = cls == ZERO
        resp[zero, 2] = 1.0
        ll = np.where(zero, log_pi[..., 2], ll)
    else:
        both = cls == BOTH_COMPONENTS
        joint = log_pi[..., :2] + lp
        mix = logsumexp(joint, axis=-1)
        ll = np.where(both, mix, ll)
        resp[both, :2] = np.exp(joint[both] - mix[both, None])
    d_scores = pi - resp
    d_raw = {}
    for name, raw in raw_params.items():
        g = np.zeros_like(raw)
        for k in (0, 1):
            with np.errstate(invalid="ignore"):
                gk = -resp[..., k] * dls[k][name]
            g[..., k] = np.where(resp[..., k] > 0, gk, 0.0) * expit(raw[..., k])
        d_raw[name] = g
    return -ll, d_scores, d_raw


def loss_gradient(y, z, weights: dict, family: Family | str):
    """Per-sample NLL with gradients w.r.t. ``z`` and summed over the batch
    w.r.t. the head weights."""
    family = Family(family)
    z = np.atleast_2d(z)
    y = np.atleast_1d(y)
    s, raw = head_scores(z, weights, family)
    nll, ds, draw = nll_score_gradient(y, family, s, raw)
    grads = {"pi_W": z.T @ ds, "pi_b": ds.sum(0)}
    dz = ds @ weights["pi_W"].T
    for name, d in draw.items():
        grads[f"{name}_W"] = z.T @ d
        grads[f"{name}_b"] = d.sum(0)
        dz = dz + d @ weights[f"{name}_W"].T
    return nll, dz, grads
