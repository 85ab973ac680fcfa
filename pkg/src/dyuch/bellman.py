"""Value-function certificate for the embedding bound.

The certificate is the explicit function B(F, r, i, M) = e*F
- exp(1 - M) * (r*r + i*i) on the domain F >= r*r + i*i, 0 <= M <= 1.
Its size is pinned between 0 and e*F, and one step of the split dynamics
below always releases at least the mass harvested at the node.  The
quadratic form governing the concavity part is written out as an explicit
4x4 matrix whose minors have closed forms; verify_sliced_psd stress-tests
positive semidefiniteness numerically at scale.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

E = math.e
PSD_TOL = 1e-9
DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class BellmanPoint:
    """State (F, r, i, M): second moment, averaged pair, normalized mass."""

    F: float
    r: float
    i: float
    M: float

    def in_domain(self, tol: float = DOMAIN_TOL) -> bool:
        return (
            self.F >= self.r * self.r + self.i * self.i - tol
            and -tol <= self.M <= 1 + tol
        )


def bellman_value(p: BellmanPoint) -> float:
    return E * p.F - math.exp(1.0 - p.M) * (p.r * p.r + p.i * p.i)


def range_gaps(p: BellmanPoint):
    """Distances to the pinning bounds 0 <= B <= e*F; both nonnegative on the domain."""
    b = bellman_value(p)
    return b, E * p.F - b


def derivative_gap(p: BellmanPoint, mu: float) -> float:
    """Surplus of the mass-harvest step over the linear harvest.

    Lowering M by mu raises the value by exp(1 - M)(r*r + i*i) expm1(mu),
    which must cover the harvested mu * (r*r + i*i); the difference is
    nonnegative whenever M <= 1 and mu >= 0.
    """
    mod2 = p.r * p.r + p.i * p.i
    return math.exp(1.0 - p.M) * mod2 * math.expm1(mu) - mu * mod2


@dataclass(frozen=True)
class SplitSpec:
    """One step of the four-way split dynamics.

    dxr and dyr are the half jumps of the pair, d1 and d2 the half spreads
    of the children masses around their common mean M - mu, and F_parts the
    children second moments in the order (x-, x+, y-, y+).
    """

    dxr: float
    dyr: float
    d1: float
    d2: float
    mu: float
    F_parts: tuple

    def __post_init__(self):
        if len(self.F_parts) != 4:
            raise ValueError("F_parts must list the four children (x-, x+, y-, y+)")

    def children(self, p: BellmanPoint):
        """Children states in the order (x-, x+, y-, y+).

        The pair moves by the conjugate rule: a jump dxr in r across the x
        pair forces the jump dyr in i with opposite orientation, and vice
        versa across the y pair.
        """
        mean = p.M - self.mu
        fxm, fxp, fym, fyp = self.F_parts
        return (
            BellmanPoint(fxm, p.r - self.dxr, p.i + self.dyr, mean - self.d1),
            BellmanPoint(fxp, p.r + self.dxr, p.i - self.dyr, mean + self.d1),
            BellmanPoint(fym, p.r - self.dyr, p.i - self.dxr, mean - self.d2),
            BellmanPoint(fyp, p.r + self.dyr, p.i + self.dxr, mean + self.d2),
        )


def _step_gap(p: BellmanPoint, split: SplitSpec, tol: float) -> float:
    if not p.in_domain(tol if tol > DOMAIN_TOL else DOMAIN_TOL):
        raise ValueError("state lies outside the certificate domain")
    if abs(sum(split.F_parts) / 4 - p.F) > max(tol, 1e-9 * abs(p.F)):
        raise ValueError("children second moments must average to the parent F")
    kids = split.children(p)
    return bellman_value(p) - sum(bellman_value(c) for c in kids) / 4


def concavity_gap(
    p: BellmanPoint,
    split: SplitSpec,
    check_children_domain: bool = False,
    tol: float = 1e-9,
) -> float:
    """Midpoint concavity surplus along a mass-free split; nonnegative always.

    Children may leave the domain without breaking the inequality, so the
    domain check on them is off by default.
    """
    if split.mu != 0:
        raise ValueError("concavity_gap needs a mass-free split (mu == 0)")
    if check_children_domain:
        for c in split.children(p):
            if not c.in_domain():
                raise ValueError("a child state left the certificate domain")
    return _step_gap(p, split, tol)


def dynamics_gap(p: BellmanPoint, split: SplitSpec, tol: float = 1e-9) -> float:
    """Full one-step surplus: value drop minus the harvested mass term."""
    if split.mu < 0:
        raise ValueError("mass density must be nonnegative")
    harvest = split.mu * (p.r * p.r + p.i * p.i)
    return _step_gap(p, split, tol) - harvest


@dataclass(frozen=True)
class HessianParams:
    """Parameters of the quadratic concavity form.

    M is the state mass, d1 and d2 the half spreads of the children masses;
    d tilts the two pair weights apart and is zero in the balanced sliced
    setting.
    """

    M: float
    d1: float
    d2: float
    d: float = 0.0

    def admissible(self) -> bool:
        """Inside the conservative scan window for the tilted form."""
        return (
            self.d >= 0
            and self.d1 >= 0
            and self.d2 >= 0
            and max(self.d + self.d1, self.d + self.d2) <= 0.5
        )


def concavity_form_matrix(hp: HessianParams) -> np.ndarray:
    """Quadratic form of the sliced concavity surplus in (r, i, dxr, dyr).

    For a mass-free split the surplus equals e times w.T A w with
    w = (r, i, dxr, dyr).  The matrix is positive semidefinite for every
    real (M, d1, d2), which is the heart of the embedding bound.
    """
    if hp.d != 0:
        raise ValueError("the sliced form has no tilt; use unsliced_form_matrix")
    p1 = math.exp(-hp.d1) - math.exp(hp.d1)
    p2 = math.exp(-hp.d2) - math.exp(hp.d2)
    sig = 2.0 * math.cosh(hp.d1) + 2.0 * math.cosh(hp.d2)
    pref = math.exp(-hp.M) / 4.0
    return pref * np.array(
        [
            [sig - 4.0, 0.0, p1, p2],
            [0.0, sig - 4.0, p2, -p1],
            [p1, p2, sig, 0.0],
            [p2, -p1, 0.0, sig],
        ]
    )


def unsliced_form_matrix(d: float, d1: float, d2: float) -> np.ndarray:
    """Concavity form with the pair weights tilted by exp(-+d), in units of
    exp(-M)/4; the tilt makes the form lose definiteness for some admissible
    parameters, which is why the balance assumption cannot be dropped."""
    p = math.exp(-d) * (math.exp(-d1) - math.exp(d1))
    q = math.exp(d) * (math.exp(-d2) - math.exp(d2))
    sig = 2.0 * math.exp(-d) * math.cosh(d1) + 2.0 * math.exp(d) * math.cosh(d2)
    return np.array(
        [
            [sig - 4.0, 0.0, p, q],
            [0.0, sig - 4.0, q, -p],
            [p, q, sig, 0.0],
            [q, -p, 0.0, sig],
        ]
    )


def principal_minors(mat: np.ndarray, corner: str = "upper_left"):
    """Nested principal minors of a 4x4 form, growing from the given corner."""
    if corner == "upper_left":
        return [float(np.linalg.det(mat[:k, :k])) for k in range(1, 5)]
    if corner == "lower_right":
        return [float(np.linalg.det(mat[4 - k :, 4 - k :])) for k in range(1, 5)]
    raise ValueError(f"unknown corner {corner!r}")


def third_minor_closed_form(hp: HessianParams) -> float:
    """Upper-left 3x3 minor of the sliced form in closed form."""
    if hp.d != 0:
        raise ValueError("closed form covers the sliced case only")
    x1 = 2.0 * math.cosh(hp.d1)
    x2 = 2.0 * math.cosh(hp.d2)
    sig = x1 + x2
    pref = math.exp(-hp.M) / 4.0
    return pref**3 * (sig - 4.0) * 2.0 * (x1 - 2.0) * (x2 - 2.0)


def det_closed_form(hp: HessianParams) -> float:
    """Determinant of the sliced form in closed form; a fourth power, never negative."""
    if hp.d != 0:
        raise ValueError("closed form covers the sliced case only")
    pref = math.exp(-hp.M) / 4.0
    s1 = 2.0 * math.sinh(hp.d1 / 2.0)
    s2 = 2.0 * math.sinh(hp.d2 / 2.0)
    return 4.0 * pref**4 * s1**4 * s2**4


def unsliced_third_minor(d: float, d1: float, d2: float) -> float:
    """Upper-left 3x3 minor of the tilted form, in units of (exp(-M)/4)**3.

    Factors as (sig - 4) * F; the second factor dips below zero off the
    d = 0 slice, so the tilted form admits genuine counterexamples.
    """
    x1 = 2.0 * math.cosh(d1)
    x2 = 2.0 * math.cosh(d2)
    a = math.exp(-d)
    b = math.exp(d)
    sig = a * x1 + b * x2
    f = 2.0 * x1 * x2 - 4.0 * a * x1 - 4.0 * b * x2 + 4.0 * a * a + 4.0 * b * b
    return (sig - 4.0) * f


def laplacian_step_gap(
    m_parent: float,
    mu_over_len: float,
    child_ms,
    u: float,
    v: float,
    dxu: float,
    dyu: float,
    check: bool = True,
    tol: float = 1e-9,
) -> float:
    """One-step surplus of the exponentially weighted second moment.

    child_ms lists the children weights in the order (x-, x+, y-, y+); both
    pair means must sit at m_parent + mu_over_len, which is how a balanced
    measure feeds its mass back into the process.  The surplus
    mean of exp(m_c)(u_c^2 + v_c^2) minus
    exp(m_parent)(u^2 + v^2)(1 + mu_over_len) is nonnegative for every real
    choice of weights meeting the pair-mean constraint.
    """
    mxm, mxp, mym, myp = child_ms
    if check:
        target = m_parent + mu_over_len
        if abs((mxm + mxp) / 2 - target) > tol or abs((mym + myp) / 2 - target) > tol:
            raise ValueError("children weight pairs must average to parent + density")
    kids = (
        (mxm, u - dxu, v + dyu),
        (mxp, u + dxu, v - dyu),
        (mym, u - dyu, v - dxu),
        (myp, u + dyu, v + dxu),
    )
    acc = 0.0
    for m_c, a, b in kids:
        acc += math.exp(m_c) * (a * a + b * b)
    return acc / 4.0 - math.exp(m_parent) * (u * u + v * v) * (1.0 + mu_over_len)


def _batched_sliced_matrices(m, d1, d2):
    n = m.shape[0]
    p1 = np.exp(-d1) - np.exp(d1)
    p2 = np.exp(-d2) - np.exp(d2)
    sig = 2.0 * np.cosh(d1) + 2.0 * np.cosh(d2)
    mats = np.zeros((n, 4, 4))
    mats[:, 0, 0] = sig - 4.0
    mats[:, 1, 1] = sig - 4.0
    mats[:, 2, 2] = sig
    mats[:, 3, 3] = sig
    mats[:, 0, 2] = mats[:, 2, 0] = p1
    mats[:, 0, 3] = mats[:, 3, 0] = p2
    mats[:, 1, 2] = mats[:, 2, 1] = p2
    mats[:, 1, 3] = mats[:, 3, 1] = -p1
    mats *= (np.exp(-m) / 4.0)[:, None, None]
    return mats


@dataclass
class PsdReport:
    """Outcome of a randomized positive semidefiniteness stress test."""

    samples: int
    min_minor: float
    min_eigenvalue: float
    max_third_minor_error: float
    max_det_error: float
    closed_form_failures: int
    ok: bool


def verify_sliced_psd(
    samples: int = 100_000,
    seed: int = 0,
    tolerance: float = PSD_TOL,
    boundary: bool = True,
) -> PsdReport:
    """Stress-test the sliced concavity form over the certificate domain.

    Draws M uniformly in [0, 1] and the spreads uniformly within the window
    keeping children masses in range, adds the degenerate edges d1 = 0 and
    d2 = 0, and checks every nested minor, the spectrum, and the two closed
    forms.  Closed forms are compared with a relative gate that falls back
    to absolute near their zero sets.
    """
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.0, 1.0, samples)
    delta = np.minimum(m, 1.0 - m)
    d1 = rng.uniform(-1.0, 1.0, samples) * delta
    d2 = rng.uniform(-1.0, 1.0, samples) * delta
    if boundary:
        grid_m, grid_t = np.meshgrid(
            np.linspace(0.0, 1.0, 21), np.linspace(-0.5, 0.5, 21)
        )
        gm, gt = grid_m.ravel(), grid_t.ravel()
        zero = np.zeros_like(gm)
        m = np.concatenate([m, gm, gm])
        d1 = np.concatenate([d1, zero, gt])
        d2 = np.concatenate([d2, gt, zero])
    mats = _batched_sliced_matrices(m, d1, d2)

    minors = [np.linalg.det(mats[:, :k, :k]) for k in range(1, 5)]
    min_minor = float(min(mn.min() for mn in minors))
    min_eig = float(np.linalg.eigvalsh(mats)[:, 0].min())

    pref = np.exp(-m) / 4.0
    x1 = 2.0 * np.cosh(d1)
    x2 = 2.0 * np.cosh(d2)
    third_closed = pref**3 * (x1 + x2 - 4.0) * 2.0 * (x1 - 2.0) * (x2 - 2.0)
    det_closed = (
        4.0 * pref**4 * (2.0 * np.sinh(d1 / 2.0)) ** 4 * (2.0 * np.sinh(d2 / 2.0)) ** 4
    )
    third_err = np.abs(minors[2] - third_closed)
    det_err = np.abs(minors[3] - det_closed)
    third_gate = np.maximum(1e-9 * np.abs(third_closed), 1e-12)
    det_gate = np.maximum(1e-9 * np.abs(det_closed), 1e-12)
    failures = int((third_err > third_gate).sum() + (det_err > det_gate).sum())

    ok = min_minor >= -tolerance and min_eig >= -tolerance and failures == 0
    return PsdReport(
        samples=int(m.shape[0]),
        min_minor=min_minor,
        min_eigenvalue=min_eig,
        max_third_minor_error=float(third_err.max()),
        max_det_error=float(det_err.max()),
        closed_form_failures=failures,
        ok=ok,
    )


def scan_unsliced(
    region: str = "sweep",
    step: float = 0.05,
    max_sum: float = 0.5,
    threshold: float = 0.0,
    triples=None,
):
    """Grid scan of the tilted third minor, hunting sign changes.

    Walks the window d, d1, d2 >= 0 with d + d1 and d + d2 at most max_sum,
    or a supplied list of triples.  region "d-zero" pins the tilt to zero
    (no witnesses exist there), "d1-zero" pins the first spread (the known
    witnesses live there), "sweep" varies all three.  Returns the witness
    list sorted by minor value, most negative first, and a summary table.
    """
    explicit = triples is not None
    if not explicit:
        if region not in ("sweep", "d-zero", "d1-zero"):
            raise ValueError(f"unknown region {region!r}")
        steps = int(round(max_sum / step))
        triples = []
        for a in range(steps + 1):
            d = a * step
            if region == "d-zero" and d != 0.0:
                break
            room = steps - a
            for b in range(room + 1):
                d1 = b * step
                if region == "d1-zero" and d1 != 0.0:
                    break
                for c in range(room + 1):
                    triples.append((d, d1, c * step))
    witnesses = []
    checked = 0
    best = None
    for d, d1, d2 in triples:
        g = unsliced_third_minor(d, d1, d2)
        checked += 1
        if best is None or g < best[3]:
            best = (d, d1, d2, g)
        if g < threshold:
            witnesses.append((d, d1, d2, g))
    witnesses.sort(key=lambda w: w[3])
    summary = {
        "region": "explicit" if explicit else region,
        "checked": checked,
        "witnesses": len(witnesses),
        "min_value": best[3] if best else 0.0,
        "argmin": list(best[:3]) if best else None,
    }
    return witnesses, summary


def write_witness_csv(path, witnesses) -> None:
    """Witness rows as CSV with a fixed d,d1,d2,G header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "d1", "d2", "G"])
        for d, d1, d2, g in witnesses:
            writer.writerow([repr(float(d)), repr(float(d1)), repr(float(d2)), repr(float(g))])
