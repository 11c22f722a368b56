"""Closed-form thresholds, tail bounds, message requirements and bit costs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gtcore import epsilon, expected_flips

LOG_BASE_REQUIRED_MESSAGES = "e"
LOG_BASE_COMM_SF = "2"
ROUNDING = "ceil"

# participation probability assumed by required_messages when none is given
DEFAULT_Q = 0.15


class VacuousBound(ValueError):
    """The bound has no content for these inputs."""


@dataclass(frozen=True)
class BoundInputs:
    S: int
    K: int
    L: int
    p: float
    q: float
    delta: float | None = None
    B: int | None = None
    alpha_const: float | None = None

    @property
    def n(self) -> int:
        return self.S // self.L

    @property
    def slack(self) -> float:
        return self.p / 2 if self.delta is None else self.delta

    @property
    def alpha(self) -> float:
        return self.p / 8 if self.alpha_const is None else self.alpha_const


@dataclass(frozen=True)
class OverheadInputs:
    S: int
    L: int
    L_n: int
    tau: int
    R_d: int = 7
    I_d: int = 7
    q: float = 0.7
    n: int | None = None

    @property
    def cluster_size(self) -> int:
        return self.S // self.L if self.n is None else self.n


def gamma(q: float, K: int, p: float, delta: float) -> float:
    base = (1 - q) ** (K - 1)
    margin = base - (1 - p) * (1 + delta)
    if margin <= 0:
        raise VacuousBound(f"(1-q)^(K-1) = {base:.4g} does not exceed (1-p)(1+delta)")
    return margin ** 2 / (2 * base)


def chernoff_good_rows(B: int, q: float, K: int, p: float, delta: float) -> float:
    """Upper bound on P(fewer than eps good rows) among B rows: exp(-q B gamma)."""
    return math.exp(-q * B * gamma(q, K, p, delta))


def flip_tail(mu: float, delta: float) -> float:
    """Upper bound on P(F >= (1 + delta) mu) for F a sum of Bernoullis with mean mu."""
    if mu < 0 or delta <= 0:
        raise ValueError("need mu >= 0 and delta > 0")
    return math.exp(-mu * delta ** 2 / (2 + delta))


def required_messages(S: int, K: int, p: float, q: float = DEFAULT_Q,
                      delta: float | None = None, alpha_const: float | None = None) -> int:
    """ceil(K ln S / (alpha gamma)) with (delta, alpha) defaulting to (p/2, p/8)."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    delta = p / 2 if delta is None else delta
    alpha_const = p / 8 if alpha_const is None else alpha_const
    g = gamma(q, K, p, delta)
    return math.ceil(round(K * math.log(S) / (alpha_const * g), 9))


def p_q_given_m(q: float, m: int) -> float:
    """Probability that m defectives in one test neither all join nor all abstain."""
    if not 0 <= q <= 1 or m < 1:
        raise ValueError("need 0 <= q <= 1 and m >= 1")
    return max(0.0, 1 - q ** m - (1 - q) ** m)


def p_cluster_error(n: int, q: float, K: int) -> float:
    """sum_{m=2}^{K} P(q|m) / ((K - 1) C(n, m))."""
    if K < 2:
        raise ValueError("cluster error needs K >= 2")
    if n < K:
        raise ValueError("need n >= K")
    return sum(p_q_given_m(q, m) / ((K - 1) * math.comb(n, m)) for m in range(2, K + 1))


def p_error_bound(S: int, L: int, K: int) -> float:
    """(L / (K - 1)) e^(2 - n) (e^(K-1) - 1) / (e - 1) with n = floor(S / L)."""
    if K < 2:
        raise ValueError("error bound needs K >= 2")
    n = S // L
    return L / (K - 1) * math.exp(2 - n) * (math.e ** (K - 1) - 1) / (math.e - 1)


def p_error_model(S: int, L: int, K: int, q: float) -> float:
    """L * P_cl(E), capped at 1; what the decoder threshold update uses."""
    return min(1.0, L * p_cluster_error(S // L, q, K))


# ---------------------------------------------------------------------------
# communication overhead, in bits

def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def comm_gp(o: OverheadInputs) -> int:
    ids = _ceil(o.q * (o.L + o.L_n))
    per_round = o.L_n * (o.R_d + o.I_d * ids + 1) + o.S * (1 + o.S)
    return o.tau * per_round


def comm_rw(o: OverheadInputs) -> int:
    return _ceil(o.tau * (o.cluster_size + 1) * o.R_d / 2 * o.L)


def comm_rwgp(o: OverheadInputs) -> int:
    return _ceil(o.tau * ((o.cluster_size + 1) * o.R_d / 2 * o.L + o.S * (1 + o.S)))


def comm_sf(o: OverheadInputs) -> int:
    return _ceil(o.tau * o.R_d * math.log2(o.S))


def comm_gsf(o: OverheadInputs) -> int:
    """SF cost plus one identifier per pull request naming the wanted reading."""
    return _ceil(o.tau * (o.R_d * math.log2(o.S) + o.S * o.I_d))


COMM = {"GP": comm_gp, "RWGP": comm_rwgp, "RW": comm_rw, "SF": comm_sf, "GSF": comm_gsf}


def evaluate_bounds(S: int, K: int, L: int, p: float, q: float,
                    delta: float | None = None, B: int | None = None) -> dict:
    """Every evaluator at one parameter point, as a JSON-ready dict."""
    delta = p / 2 if delta is None else delta
    if B is None:
        try:
            B = required_messages(S, K, p, q, delta)
        except VacuousBound:
            B = None
    out: dict = {
        "inputs": {"S": S, "K": K, "L": L, "p": p, "q": q, "delta": delta, "B": B,
                   "n": S // L, "alpha_const": p / 8},
        "log_base": {"required_messages": LOG_BASE_REQUIRED_MESSAGES,
                     "comm_sf": LOG_BASE_COMM_SF},
        "rounding": ROUNDING,
    }

    def guarded(fn, *args):
        try:
            return fn(*args)
        except (VacuousBound, ValueError) as exc:
            return {"error": str(exc)}

    out["gamma"] = guarded(gamma, q, K, p, delta)
    out["required_messages"] = guarded(required_messages, S, K, p, q, delta)
    if B is not None:
        mu = expected_flips(p, q, B)
        out["epsilon"] = epsilon(delta, p, q, B)
        out["expected_flips"] = mu
        out["chernoff_good_rows"] = guarded(chernoff_good_rows, B, q, K, p, delta)
        out["flip_tail"] = guarded(flip_tail, mu, delta)
    out["p_q_given_m"] = {str(m): p_q_given_m(q, m) for m in range(1, max(K, 2) + 1)}
    if K >= 2:
        out["p_cluster_error"] = guarded(p_cluster_error, S // L, q, K)
        out["p_error_bound"] = guarded(p_error_bound, S, L, K)
        out["p_error_model"] = guarded(p_error_model, S, L, K, q)
    return out
