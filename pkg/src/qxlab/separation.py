"""The X/Y random-matrix construction and its separating-sentence certificate.

X = (U1, U2, U3) acts on C^n; Y = (U1+U1, U2+U2, U3+U4) acts on C^{2n}.
The commutant of X is (generically) the scalars, while Y commutes with the
two block projections, which is what the sentence psi detects. All checks
here are the matrix-level inequalities; the II_1 tensor factor is trivial.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .haar import RngStream, UnitaryTuple, mix, sample_tuple
from .linalg import block_double, commutator, hs_norm2, normalized_trace, operator_norm
from .spectral import (DEFAULT_MAX_ITER, DEFAULT_TOL, RESIDUAL_TOL, GapReport,
                       commutant_gap, restricted_top_eigen)

X_GAP_MIN = 1 / 7
Y_GAP_MIN = 1 / 7
B12_RATIO_MAX = 7.0
U34_DIST2_MIN = 9 / 5
X_EPS_TARGET = 4 / 3  # 1 / (d/(d-1)^2) at d = 3
SPOT_ATOL = 1e-9


@dataclass
class XYPair:
    n: int
    X: UnitaryTuple
    Y: UnitaryTuple
    u4: np.ndarray
    seed: int

    @property
    def block_projections(self) -> list[np.ndarray]:
        n = self.n
        top = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        top[:n, :n] = np.eye(n)
        return [top, np.eye(2 * n) - top]


@dataclass
class B12Report:
    max_sampled_ratio: float
    b12_epsilon: float
    worst_ratio: float
    residual: float
    iterations: int
    certified: bool


@dataclass
class SeparationReport:
    n: int
    seed: int
    x_epsilon: float
    y_epsilon: float
    b12_epsilon: float
    u34_dist2: float
    tr_u3star_u4_abs: float
    psi_x_lower: float
    psi_y_upper: float
    certified: bool
    reasons: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        keys = ("n", "seed", "x_epsilon", "y_epsilon", "b12_epsilon", "u34_dist2",
                "psi_x_lower", "psi_y_upper", "certified")
        return {k: getattr(self, k) for k in keys}


def build_xy(n: int, master_seed: int) -> XYPair:
    if n < 2:
        raise ValueError("n must be >= 2")
    four = sample_tuple(n, 4, master_seed)
    u1, u2, u3, u4 = four.unitaries
    X = UnitaryTuple(n, 3, [u1, u2, u3], master_seed, four.stream_ids[:3])
    Y = UnitaryTuple(2 * n, 3, [block_double(u1, u1), block_double(u2, u2), block_double(u3, u4)],
                     master_seed, four.stream_ids[:3])
    return XYPair(n, X, Y, u4, master_seed)


def xy_from_unitaries(u1, u2, u3, u4, seed: int = 0) -> XYPair:
    """Assemble a pair from given unitaries (used for forced configurations)."""
    n = u1.shape[0]
    X = UnitaryTuple(n, 3, [u1, u2, u3], seed)
    Y = UnitaryTuple(2 * n, 3, [block_double(u1, u1), block_double(u2, u2), block_double(u3, u4)],
                     seed)
    return XYPair(n, X, Y, u4, seed)


def check_x_gap(p: XYPair, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> GapReport:
    return commutant_gap(p.X, [np.eye(p.n)], tol, max_iter)


def check_y_gap(p: XYPair, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> GapReport:
    return commutant_gap(p.Y, p.block_projections, tol, max_iter)


def _rr(us3, u4, B):
    """R^*R for R(B) = ([B, U1], [B, U2], U3 B - B U4)."""
    u1, u2, u3 = us3
    out = 6 * B
    for U in (u1, u2):
        Uh = U.conj().T
        out = out - U @ B @ Uh - Uh @ B @ U
    return out - u3.conj().T @ B @ u4 - u3 @ B @ u4.conj().T


def b12_ratio(p: XYPair, B) -> float:
    u1, u2, u3 = p.X.unitaries
    den = (hs_norm2(commutator(B, u1)) ** 2 + hs_norm2(commutator(B, u2)) ** 2
           + hs_norm2(u3 @ B - B @ p.u4) ** 2)
    num = hs_norm2(B) ** 2
    if den == 0.0:
        return float("inf") if num > 0 else 0.0
    return num / den


def random_unit_ball(n: int, rng: np.random.Generator) -> np.ndarray:
    """Ginibre matrix rescaled to operator norm 1."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    return Z / operator_norm(Z)


def check_b12_estimate(p: XYPair, trials: int = 20, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> B12Report:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = RngStream(p.seed, mix(p.n, 0xB12)).generator()
    ratios = []
    for _ in range(trials):
        B = random_unit_ball(p.n, rng)
        if hs_norm2(B) == 0.0:
            continue
        ratios.append(b12_ratio(p, B))
    us3 = p.X.unitaries
    # R^*R <= 12, so 12 - R^*R is nonnegative and its top is 12 - min eig
    top = restricted_top_eigen(lambda B: 12.0 * B - _rr(us3, p.u4, B), p.n, (), hermitian=False,
                               tol=tol, max_iter=max_iter, seed=mix(p.seed, 0xB12), method="lanczos")
    eps = max(0.0, 12.0 - top.value)
    worst = 1.0 / eps if eps > 0 else float("inf")
    ok = top.converged and top.residual <= RESIDUAL_TOL
    return B12Report(max(ratios) if ratios else 0.0, eps, worst, top.residual, top.iterations,
                     ok and worst <= B12_RATIO_MAX)


def check_u34(p: XYPair) -> tuple[float, float]:
    u3 = p.X.unitaries[2]
    tr = normalized_trace(u3.conj().T @ p.u4)
    return abs(tr), hs_norm2(u3 - p.u4) ** 2


def _psi_inner_x(X: UnitaryTuple, z1) -> float:
    """1 - ||z1||^2 + |tr z1|^2 + 7 sum ||[X_j, z1]||^2 (the sup term is >= 0)."""
    return (1 - hs_norm2(z1) ** 2 + abs(normalized_trace(z1)) ** 2
            + 7 * sum(hs_norm2(commutator(U, z1)) ** 2 for U in X.unitaries))


def certify_separation(p: XYPair, x_gap: GapReport | None = None, y_gap: GapReport | None = None,
                       trials: int = 100, b12_trials: int = 20) -> SeparationReport:
    if x_gap is None:
        x_gap = check_x_gap(p)
    if y_gap is None:
        y_gap = check_y_gap(p)
    b12 = check_b12_estimate(p, b12_trials)
    tr34, dist2 = check_u34(p)
    reasons: list[str] = []
    rng = RngStream(p.seed, mix(p.n, 0x5E9)).generator()
    Ys = p.Y.unitaries
    m = 2 * p.n

    # branch (a): z1 = 2p - 1 certifies psi(Y) = 0
    z1 = p.block_projections[0] - p.block_projections[1]
    y_ok = True
    if abs(hs_norm2(z1) ** 2 - 1) > 1e-12 or abs(normalized_trace(z1)) > 1e-12:
        y_ok = False
        reasons.append("z1 is not a traceless unit")
    if sum(hs_norm2(commutator(Y, z1)) ** 2 for Y in Ys) > 1e-20:
        y_ok = False
        reasons.append("z1 does not commute with Y")
    if not (y_gap.certified and y_gap.epsilon >= Y_GAP_MIN):
        y_ok = False
        reasons.append(f"y gap {y_gap.epsilon:.4g} below 1/7 or uncertified")
    if y_ok:
        basis = p.block_projections
        for _ in range(trials):
            z2 = random_unit_ball(m, rng)
            e_b = sum(normalized_trace(P @ z2) / normalized_trace(P) * P for P in basis)
            dist2_b = hs_norm2(z2 - e_b) ** 2
            lhs = hs_norm2(commutator(z1, z2)) ** 2
            rhs = 28 * sum(hs_norm2(commutator(Y, z2)) ** 2 for Y in Ys)
            if lhs > 4 * dist2_b + SPOT_ATOL or 4 * dist2_b > rhs + SPOT_ATOL:
                y_ok = False
                reasons.append("random z2 violates the commutant estimate")
                break

    # branch (b): psi(X) = 1 from the X gap
    x_ok = x_gap.certified and x_gap.epsilon >= X_GAP_MIN
    if not x_ok:
        reasons.append(f"x gap {x_gap.epsilon:.4g} below 1/7 or uncertified")
    else:
        if _psi_inner_x(p.X, np.zeros((p.n, p.n), dtype=np.complex128)) != 1.0:
            x_ok = False
            reasons.append("z1 = 0 does not give 1")
        for _ in range(trials):
            if _psi_inner_x(p.X, random_unit_ball(p.n, rng)) < 1 - SPOT_ATOL:
                x_ok = False
                reasons.append("random z1 violates the lower bound")
                break

    # psi takes values in [0, 1]; uncertified branches fall back to those trivial bounds
    return SeparationReport(n=p.n, seed=p.seed, x_epsilon=x_gap.epsilon, y_epsilon=y_gap.epsilon,
                            b12_epsilon=b12.b12_epsilon, u34_dist2=dist2, tr_u3star_u4_abs=tr34,
                            psi_x_lower=1.0 if x_ok else 0.0, psi_y_upper=0.0 if y_ok else 1.0,
                            certified=x_ok and y_ok, reasons=reasons)


# -- words and moments ------------------------------------------------------------------------

_LETTER = re.compile(r"^(?:x_?)?([1-9])(\*?)$")


def parse_word(word) -> list[tuple[int, bool]]:
    """Parse ``"1 2 1* 2*"`` (or a list of such tokens) into (index, adjoint) letters."""
    tokens = word.replace(",", " ").split() if isinstance(word, str) else list(word)
    letters = []
    for tok in tokens:
        m = _LETTER.match(str(tok).strip())
        if not m:
            raise ValueError(f"malformed letter {tok!r}")
        letters.append((int(m.group(1)), m.group(2) == "*"))
    for a, b in zip(letters, letters[1:]):
        if a[0] == b[0] and a[1] != b[1]:
            raise ValueError(f"word is not reduced: {word!r}")
    return letters


def format_word(letters) -> str:
    return " ".join(f"{j}{'*' if adj else ''}" for j, adj in letters) or "e"


def evaluate_word(us: Sequence[np.ndarray], letters) -> np.ndarray:
    size = us[0].shape[0]
    out = np.eye(size, dtype=np.complex128)
    for j, adj in letters:
        if j > len(us):
            raise ValueError(f"letter {j} exceeds tuple length {len(us)}")
        U = us[j - 1]
        out = out @ (U.conj().T if adj else U)
    return out


def moment_match(p: XYPair, words) -> list[dict]:
    rows = []
    for w in words:
        letters = parse_word(w)
        tx = normalized_trace(evaluate_word(p.X.unitaries, letters))
        ty = normalized_trace(evaluate_word(p.Y.unitaries, letters))
        rows.append({"word": format_word(letters), "n": p.n, "seed": p.seed,
                     "abs_tr_x": abs(tx), "abs_tr_y": abs(ty), "abs_diff": abs(tx - ty)})
    return rows


def concentration_scan(word, ns: Sequence[int], trials: int, seed: int) -> list[dict]:
    """Sample std of Re tr_n(w(U)) over fresh Haar tuples, per n."""
    if trials < 30:
        raise ValueError("trials must be >= 30")
    letters = parse_word(word)
    d = max((j for j, _ in letters), default=1)
    rows = []
    for n in ns:
        vals = np.array([normalized_trace(evaluate_word(
            sample_tuple(n, d, mix(seed, n, k)).unitaries, letters)).real for k in range(trials)])
        rows.append({"n": int(n), "trials": trials, "mean": float(vals.mean()),
                     "sample_std": float(vals.std(ddof=1))})
    return rows


def report_dict(obj) -> dict:
    return asdict(obj)
