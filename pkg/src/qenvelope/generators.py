"""Rate matrices and convex operator families built from them.

A rate matrix has nonpositive diagonal, nonnegative off-diagonal entries and
zero row sums.  A :class:`GeneratorFamily` collects finitely many (rate
matrix, penalty vector) pairs and acts on vectors through the componentwise
supremum (or infimum) of ``q @ u + f`` over its members.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import TOL, _as_square, affine_flow


class InvalidRateMatrixError(ValueError):
    """Raised when a matrix fails the rate-matrix sign/row-sum conditions."""

    def __init__(self, message, violations):
        super().__init__(message)
        self.violations = tuple(violations)


class InvalidGeneratorError(ValueError):
    """Raised when a generator family cannot be built from valid members."""


@dataclass(frozen=True)
class RateMatrixViolation:
    """One failed rate-matrix condition, with its location and magnitude."""

    condition: str  # 'diagonal' | 'off_diagonal' | 'row_sum'
    row: int
    col: int
    magnitude: float

    def __str__(self):
        if self.condition == "diagonal":
            return f"positive diagonal entry at ({self.row},{self.col}): {self.magnitude:.6g}"
        if self.condition == "off_diagonal":
            return f"negative off-diagonal entry at ({self.row},{self.col}): -{self.magnitude:.6g}"
        return f"row {self.row} sums to magnitude {self.magnitude:.6g} instead of 0"


def rate_matrix_violations(m, tol: float = TOL.rate_matrix) -> list:
    """List every violated rate-matrix condition of ``m`` (empty if valid)."""
    m = _as_square(m)
    if not np.isfinite(m).all():
        raise ValueError("rate-matrix check on a matrix with non-finite entries")
    out = []
    diag = np.diagonal(m)
    for i in np.nonzero(diag > tol)[0]:
        out.append(RateMatrixViolation("diagonal", int(i), int(i), float(diag[i])))
    off = m.copy()
    np.fill_diagonal(off, 0.0)
    for i, j in zip(*np.nonzero(off < -tol)):
        out.append(RateMatrixViolation("off_diagonal", int(i), int(j), float(-off[i, j])))
    sums = m.sum(axis=1)
    for i in np.nonzero(np.abs(sums) > tol)[0]:
        out.append(RateMatrixViolation("row_sum", int(i), int(i), float(abs(sums[i]))))
    return out


def validate_rate_matrix(m, tol: float = TOL.rate_matrix) -> np.ndarray:
    """Return ``m`` as a float array if it is a rate matrix, else raise.

    The raised :class:`InvalidRateMatrixError` carries the full violation
    list on its ``violations`` attribute.
    """
    m = _as_square(m)
    violations = rate_matrix_violations(m, tol)
    if violations:
        shown = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise InvalidRateMatrixError(f"not a rate matrix: {shown}{more}", violations)
    return m


def build_laplacian(d: int, delta: float) -> np.ndarray:
    """Second-difference rate matrix on a uniform grid with reflecting ends.

    Interior rows are (1, -2, 1) / delta^2; the first and last rows are
    (-1, 1) and (1, -1) over delta^2, so all row sums vanish.
    """
    if d < 2:
        raise ValueError(f"need at least two states, got d={d}")
    if not delta > 0:
        raise ValueError(f"grid spacing must be positive, got {delta}")
    m = np.zeros((d, d))
    idx = np.arange(d)
    m[idx, idx] = -2.0
    m[0, 0] = m[-1, -1] = -1.0
    m[idx[:-1], idx[:-1] + 1] = 1.0
    m[idx[1:], idx[1:] - 1] = 1.0
    return m / delta**2


def build_drift(d: int, delta: float) -> np.ndarray:
    """One-sided first-difference rate matrix; the last state is absorbing.

    Rows are (-1, 1) / delta with a zero final row.
    """
    if d < 2:
        raise ValueError(f"need at least two states, got d={d}")
    if not delta > 0:
        raise ValueError(f"grid spacing must be positive, got {delta}")
    m = np.zeros((d, d))
    idx = np.arange(d - 1)
    m[idx, idx] = -1.0
    m[idx, idx + 1] = 1.0
    return m / delta


@dataclass(frozen=True)
class StateGrid:
    """Uniform price grid x_i = i * delta for i = 0, ..., dim - 1."""

    dim: int
    delta: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"grid needs at least one state, got dim={self.dim}")
        if not self.delta > 0:
            raise ValueError(f"grid spacing must be positive, got {self.delta}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.dim) * self.delta


@dataclass(eq=False)
class GeneratorFamily:
    """Finite family of (rate matrix, penalty) pairs with a fixed direction.

    Parameters
    ----------
    matrices : sequence of square arrays, all of one dimension
    penalties : optional sequence of vectors, one per matrix.  Penalties must
        be componentwise nonpositive and at least one member must carry an
        exactly zero penalty, so that constants are preserved.  Omitting them
        gives the sublinear case (all penalties zero).
    direction : 'upper' for the componentwise supremum, 'lower' for the
        infimum.

    Matrices are *not* checked for the rate-matrix conditions here; that
    keeps deliberately broken families constructible for diagnostics (see
    :func:`check_pmp`).  Use :meth:`member_violations` or
    :func:`interval_generator` when validity matters.
    """

    matrices: tuple
    penalties: tuple | None = None
    direction: str = "upper"
    _flow_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.matrices)
        if not mats:
            raise ValueError("a generator family needs at least one member")
        d = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for m in mats:
            if m.shape != (d, d):
                raise ValueError("all members must be square matrices of one dimension")
            if not np.isfinite(m).all():
                raise ValueError("family member with non-finite entries")
        if self.penalties is None:
            pens = tuple(np.zeros(d) for _ in mats)
        else:
            pens = tuple(np.array(p, dtype=float) for p in self.penalties)
            if len(pens) != len(mats):
                raise ValueError(f"{len(mats)} matrices but {len(pens)} penalties")
            for p in pens:
                if p.shape != (d,):
                    raise ValueError("each penalty must be a vector matching the matrix dimension")
                if not np.isfinite(p).all():
                    raise ValueError("penalty with non-finite entries")
                if (p > 0).any():
                    raise ValueError("penalties must be componentwise nonpositive")
            if not any((p == 0).all() for p in pens):
                raise ValueError("at least one member must carry an exactly zero penalty")
        for arr in mats + pens:
            arr.setflags(write=False)
        if self.direction not in ("upper", "lower"):
            raise ValueError(f"direction must be 'upper' or 'lower', got {self.direction!r}")
        self.matrices = mats
        self.penalties = pens

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def n_members(self) -> int:
        return len(self.matrices)

    @property
    def is_sublinear(self) -> bool:
        return all((p == 0).all() for p in self.penalties)

    def flipped(self) -> "GeneratorFamily":
        """The same members with the opposite direction."""
        other = "lower" if self.direction == "upper" else "upper"
        return GeneratorFamily(self.matrices, self.penalties, other)

    def member_violations(self, tol: float = TOL.rate_matrix) -> dict:
        """Map member index -> violation list, for members that fail."""
        out = {}
        for idx, m in enumerate(self.matrices):
            violations = rate_matrix_violations(m, tol)
            if violations:
                out[idx] = violations
        return out

    def flows(self, h: float, k: int | None = None) -> tuple:
        """Per-member affine flows for step length h, cached per (h, k).

        The cache is filled at most once per key with deterministic values,
        so a rebuild race at worst repeats identical work.
        """
        key = (float(h).hex(), k)
        flows = self._flow_cache.get(key)
        if flows is None:
            flows = tuple(
                affine_flow(m, p, h, k=k) for m, p in zip(self.matrices, self.penalties)
            )
            self._flow_cache[key] = flows
        return flows


def interval_generator(
    q0,
    q,
    lambda_low: float,
    lambda_high: float,
    direction: str = "upper",
) -> GeneratorFamily:
    """Family for the uncertainty interval ``q0 + lambda * q``, lambda in [lo, hi].

    The componentwise extremum of an affine function of lambda sits at an
    interval endpoint, so only the two endpoint matrices are stored:
    ``{q0 + lambda_low * q, q0 + lambda_high * q}``, both with zero penalty.
    Both endpoints must satisfy the rate-matrix conditions.
    """
    q0 = _as_square(q0)
    q = _as_square(q)
    if q0.shape != q.shape:
        raise ValueError(f"q0 has shape {q0.shape} but q has shape {q.shape}")
    if not lambda_low <= lambda_high:
        raise ValueError(f"empty interval: lambda_low={lambda_low} > lambda_high={lambda_high}")
    members = []
    for lam in (lambda_low, lambda_high):
        member = q0 + lam * q
        violations = rate_matrix_violations(member)
        if violations:
            shown = "; ".join(str(v) for v in violations[:5])
            raise InvalidGeneratorError(
                f"endpoint lambda={lam:g} gives an invalid rate matrix: {shown}"
            )
        members.append(member)
    return GeneratorFamily(tuple(members), direction=direction)


def apply_q_operator(fam: GeneratorFamily, u, return_argmax: bool = False):
    """Componentwise extremum of ``q @ u + f`` over the family members.

    With ``return_argmax=True`` also returns the member index attaining the
    extremum in each component (ties resolved to the lowest index).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (fam.dim,):
        raise ValueError(f"expected a vector of length {fam.dim}, got shape {u.shape}")
    values = np.stack([m @ u + p for m, p in zip(fam.matrices, fam.penalties)])
    if fam.direction == "upper":
        best, pick = values.max(axis=0), values.argmax(axis=0)
    else:
        best, pick = values.min(axis=0), values.argmin(axis=0)
    if return_argmax:
        return best, pick
    return best


@dataclass(frozen=True)
class PmpViolation:
    """A single failed maximum-principle check."""

    check: str
    detail: str
    magnitude: float


@dataclass(frozen=True)
class PmpCategory:
    name: str
    checks: int
    failures: tuple

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class PmpReport:
    """Outcome of :func:`check_pmp`, by check category with counterexamples."""

    categories: tuple

    @property
    def passed(self) -> bool:
        return all(cat.passed for cat in self.categories)

    @property
    def failures(self) -> tuple:
        return tuple(v for cat in self.categories for v in cat.failures)

    @property
    def checks_run(self) -> int:
        return sum(cat.checks for cat in self.categories)


_PMP_SPIKE_SIZES = (0.5, 1.0, 10.0)
_PMP_CONSTANTS = (-2.5, 1.0, 5.0)


def check_pmp(fam: GeneratorFamily, trials: int = 100, rng_seed: int = 0,
              tol: float = 1e-12) -> PmpReport:
    """Probe the positive maximum principle and the operator sign axioms.

    Three kinds of checks are run against the family operator Q:

    * random vectors: at every component where the vector attains its
      maximum, Q u must be <= tol;
    * coordinate spikes: (Q (lam e_i))_i <= tol and (Q (-lam e_j))_i <= tol
      for i != j, for several spike sizes lam > 0;
    * constants: Q applied to a constant vector vanishes up to tol.

    Returns a :class:`PmpReport`; counterexamples carry the offending values.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    rng = np.random.default_rng(rng_seed)
    d = fam.dim
    categories = []

    checks, fails = 0, []
    for trial in range(trials):
        u = rng.standard_normal(d)
        qu = apply_q_operator(fam, u)
        for i in np.nonzero(u == u.max())[0]:
            checks += 1
            if qu[i] > tol:
                fails.append(PmpViolation(
                    "random_max",
                    f"trial {trial}: (Qu)_{i} = {qu[i]:.6g} > {tol:g} at a maximum of u",
                    float(qu[i]),
                ))
    categories.append(PmpCategory("random maxima", checks, tuple(fails)))

    checks, fails = 0, []
    for lam in _PMP_SPIKE_SIZES:
        for i in range(d):
            spike = np.zeros(d)
            spike[i] = lam
            value = apply_q_operator(fam, spike)[i]
            checks += 1
            if value > tol:
                fails.append(PmpViolation(
                    "positive_spike",
                    f"(Q ({lam:g} e_{i}))_{i} = {value:.6g} > {tol:g}",
                    float(value),
                ))
    categories.append(PmpCategory("own-state spikes", checks, tuple(fails)))

    checks, fails = 0, []
    for lam in _PMP_SPIKE_SIZES:
        for j in range(d):
            spike = np.zeros(d)
            spike[j] = -lam
            values = apply_q_operator(fam, spike)
            for i in range(d):
                if i == j:
                    continue
                checks += 1
                if values[i] > tol:
                    fails.append(PmpViolation(
                        "negative_spike",
                        f"(Q (-{lam:g} e_{j}))_{i} = {values[i]:.6g} > {tol:g}",
                        float(values[i]),
                    ))
    categories.append(PmpCategory("foreign-state spikes", checks, tuple(fails)))

    checks, fails = 0, []
    for alpha in _PMP_CONSTANTS:
        residual = float(np.abs(apply_q_operator(fam, np.full(d, alpha))).max())
        checks += 1
        if residual > tol:
            fails.append(PmpViolation(
                "constant",
                f"||Q({alpha:g} * 1)|| = {residual:.6g} > {tol:g}",
                residual,
            ))
    categories.append(PmpCategory("constants", checks, tuple(fails)))

    return PmpReport(tuple(categories))


def read_matrix_file(path) -> np.ndarray:
    """Read a square matrix from the plain-text format: the dimension on the
    first line, then d rows of d whitespace-separated numbers."""
    d, tokens = _read_numeric_file(path)
    if len(tokens) != d * d:
        raise ValueError(f"{path}: expected {d}x{d} entries, found {len(tokens)} values")
    return np.array(tokens, dtype=float).reshape(d, d)


def read_vector_file(path) -> np.ndarray:
    """Read a vector: its length on the first line, then that many numbers."""
    d, tokens = _read_numeric_file(path)
    if len(tokens) != d:
        raise ValueError(f"{path}: expected {d} entries, found {len(tokens)} values")
    return np.array(tokens, dtype=float)


def write_matrix_file(path, m) -> None:
    """Write a matrix in the same plain-text format, at full precision."""
    m = _as_square(m)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{m.shape[0]}\n")
        for row in m:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def _read_numeric_file(path):
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    body = []
    for line in lines:
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            body.append(stripped)
    if not body:
        raise ValueError(f"{path}: empty file")
    try:
        d = int(body[0])
    except ValueError:
        raise ValueError(f"{path}: first line must be the dimension, got {body[0]!r}") from None
    if d < 1:
        raise ValueError(f"{path}: dimension must be positive, got {d}")
    try:
        tokens = [float(tok) for line in body[1:] for tok in line.split()]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    return d, tokens
