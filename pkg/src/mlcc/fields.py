"""Smooth maps from R^n into the SPD cone, with exact or finite-difference jets.

Every shipped field has the closed form  g(x) = exp(-q(x)) * P(x)  where q is
a scalar polynomial and P a symmetric-matrix polynomial.  This single shape
covers pure polynomial fields (q = 0), scalar Gaussians, Gaussian envelopes of
a constant SPD matrix, and the perturbed fixtures, while keeping exact
entrywise differentiation available as the oracle for the finite-difference
path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._poly import poly_diff, poly_eval, poly_substitute_prefix
from .errors import InputError, NotPositiveError
from .metric import SpdMatrix

#: Default central-difference step for finite-difference jets.
DEFAULT_FD_STEP = 1e-4

# Matrix polynomial: list of (degs, symmetric (d, d) coefficient array).
MatTerm = tuple[tuple[int, ...], np.ndarray]


@dataclass(frozen=True)
class Jet2:
    """Second-order jet of a matrix field at a point.

    ``value`` is the SPD value, ``d1[j]`` the first partials, ``d2[j][k]``
    the second partials (symmetrized in (j, k) on assembly).
    """

    value: SpdMatrix
    d1: np.ndarray  # (n, d, d)
    d2: np.ndarray  # (n, n, d, d)

    @property
    def n(self) -> int:
        return self.d1.shape[0]

    @property
    def d(self) -> int:
        return self.value.dim


def _mat_diff(terms: list[MatTerm], j: int) -> list[MatTerm]:
    out = []
    for degs, coeff in terms:
        dj = degs[j]
        if dj == 0:
            continue
        out.append((degs[:j] + (dj - 1,) + degs[j + 1 :], dj * coeff))
    return out


def _mat_eval(terms: list[MatTerm], x, d: int) -> np.ndarray:
    total = np.zeros((d, d))
    for degs, coeff in terms:
        m = 1.0
        for xi, di in zip(x, degs):
            if di:
                m *= xi**di
        total += m * coeff
    return total


class MatrixField:
    """A map x -> exp(-q(x)) * P(x) into the d x d symmetric matrices.

    Positivity is enforced per evaluation: querying a point where the value
    is not positive definite raises :class:`NotPositiveError`.  Jets come
    either from exact differentiation of the closed form or from central
    finite differences (optionally Richardson extrapolated).
    """

    def __init__(
        self,
        n: int,
        d: int,
        q_terms,
        p_terms,
        jet_mode: str = "exact",
        h: float = DEFAULT_FD_STEP,
        richardson: bool = True,
        name: str = "custom",
    ):
        if n < 1 or d < 1:
            raise InputError("field dimensions must be positive")
        if jet_mode not in ("exact", "finite_difference"):
            raise InputError(f"unknown jet mode {jet_mode!r}")
        self.n = n
        self.d = d
        self.name = name
        self.jet_mode = jet_mode
        self.h = float(h)
        self.richardson = bool(richardson)
        self._q = [(float(c), tuple(degs)) for c, degs in q_terms]
        self._p = []
        for degs, coeff in p_terms:
            a = np.asarray(coeff, dtype=float)
            if a.shape != (d, d):
                raise InputError("matrix coefficient has wrong shape")
            if np.abs(a - a.T).max() > 0.0:
                raise InputError("matrix coefficients must be symmetric")
            self._p.append((tuple(degs), a))
        if any(len(degs) != n for _, degs in self._q):
            raise InputError("scalar polynomial degree tuples must have length n")
        if any(len(degs) != n for degs, _ in self._p):
            raise InputError("matrix polynomial degree tuples must have length n")

    # -- plain evaluation ---------------------------------------------------

    def raw_value(self, x) -> np.ndarray:
        """Value without the positivity check (symmetric by construction)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,) or not np.isfinite(x).all():
            raise InputError(f"expected a finite point in R^{self.n}")
        env = math.exp(-poly_eval(self._q, x))
        return env * _mat_eval(self._p, x, self.d)

    def value(self, x) -> np.ndarray:
        """Evaluate at ``x``; raises NotPositiveError off the SPD cone."""
        return SpdMatrix(self.raw_value(x)).entries

    # -- jets ----------------------------------------------------------------

    def jet(self, x) -> Jet2:
        x = np.asarray(x, dtype=float)
        if self.jet_mode == "exact":
            return self._exact_jet(x)
        jet = self._fd_jet(x, self.h)
        if self.richardson:
            finer = self._fd_jet(x, self.h / 2.0)
            jet = Jet2(
                value=jet.value,
                d1=(4.0 * finer.d1 - jet.d1) / 3.0,
                d2=(4.0 * finer.d2 - jet.d2) / 3.0,
            )
        return jet

    def _exact_jet(self, x) -> Jet2:
        n, d = self.n, self.d
        value = SpdMatrix(self.raw_value(x))
        env = math.exp(-poly_eval(self._q, x))
        p0 = _mat_eval(self._p, x, d)
        qj = [poly_eval(poly_diff(self._q, j), x) for j in range(n)]
        pj = [_mat_eval(_mat_diff(self._p, j), x, d) for j in range(n)]
        d1 = np.empty((n, d, d))
        for j in range(n):
            d1[j] = env * (pj[j] - qj[j] * p0)
        d2 = np.empty((n, n, d, d))
        for j in range(n):
            dq_j = poly_diff(self._q, j)
            dp_j = _mat_diff(self._p, j)
            for k in range(j, n):
                qjk = poly_eval(poly_diff(dq_j, k), x)
                pjk = _mat_eval(_mat_diff(dp_j, k), x, d)
                block = env * (
                    pjk
                    - qj[j] * pj[k]
                    - qj[k] * pj[j]
                    + (qj[j] * qj[k] - qjk) * p0
                )
                d2[j, k] = block
                d2[k, j] = block
        return Jet2(value=value, d1=d1, d2=d2)

    def _fd_jet(self, x, h: float) -> Jet2:
        n = self.n
        value = SpdMatrix(self.raw_value(x))
        g0 = value.entries
        plus = [self.value(x + h * _unit(n, j)) for j in range(n)]
        minus = [self.value(x - h * _unit(n, j)) for j in range(n)]
        d1 = np.stack([(plus[j] - minus[j]) / (2.0 * h) for j in range(n)])
        d2 = np.empty((n, n, self.d, self.d))
        for j in range(n):
            d2[j, j] = (plus[j] - 2.0 * g0 + minus[j]) / h**2
            for k in range(j + 1, n):
                step_j, step_k = h * _unit(n, j), h * _unit(n, k)
                cross = (
                    self.value(x + step_j + step_k)
                    - self.value(x + step_j - step_k)
                    - self.value(x - step_j + step_k)
                    + self.value(x - step_j - step_k)
                ) / (4.0 * h**2)
                d2[j, k] = cross
                d2[k, j] = cross
        return Jet2(value=value, d1=d1, d2=d2)

    # -- derived fields -------------------------------------------------------

    def with_jet_mode(
        self, jet_mode: str, h: float = DEFAULT_FD_STEP, richardson: bool = True
    ) -> "MatrixField":
        return MatrixField(
            self.n, self.d, self._q, self._p, jet_mode, h, richardson, self.name
        )


def _unit(n: int, j: int) -> np.ndarray:
    e = np.zeros(n)
    e[j] = 1.0
    return e


def evaluate_jet(field: MatrixField, x) -> Jet2:
    """Second-order jet of ``field`` at ``x`` (exact or finite-difference)."""
    return field.jet(x)


def conjugate_field(field: MatrixField, p) -> MatrixField:
    """Congruence of the field by an orthogonal matrix: x -> P^T g(x) P."""
    p = np.asarray(p, dtype=float)
    if p.shape != (field.d, field.d):
        raise InputError("conjugating matrix has wrong shape")
    if np.abs(p.T @ p - np.eye(field.d)).max() > 1e-12:
        raise InputError("conjugating matrix is not orthogonal")
    terms = []
    for degs, coeff in field._p:
        rotated = p.T @ coeff @ p
        terms.append((degs, 0.5 * (rotated + rotated.T)))
    return MatrixField(
        field.n,
        field.d,
        field._q,
        terms,
        field.jet_mode,
        field.h,
        field.richardson,
        name=f"{field.name}~",
    )


def restrict_field(field: MatrixField, t) -> MatrixField:
    """Freeze the leading coordinates at ``t``; returns a field in y alone."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n0 = t.shape[0]
    if n0 >= field.n:
        raise InputError("cannot freeze all coordinates of the field")
    q = poly_substitute_prefix(field._q, t)
    p = []
    for degs, coeff in field._p:
        scale = 1.0
        for ti, di in zip(t, degs[:n0]):
            if di:
                scale *= ti**di
        p.append((degs[n0:], scale * coeff))
    return MatrixField(
        field.n - n0,
        field.d,
        q,
        p,
        field.jet_mode,
        field.h,
        field.richardson,
        name=f"{field.name}|t",
    )


# -- builtins -----------------------------------------------------------------

#: Fixed perturbation direction used by the perturbed_gaussian_spd fixture.
PERTURBATION_DIRECTION = np.array([[0.3, 0.1], [0.1, -0.2]])

BUILTIN_NAMES = (
    "gaussian_scalar",
    "gaussian_times_spd",
    "raufi_printed",
    "raufi_corrected",
    "polynomial",
    "gaussian_cross_spd",
    "perturbed_gaussian_spd",
    "double_well_scalar",
)


def _sq_norm_terms(n: int, factor: float) -> list:
    return [(factor, tuple(2 if i == j else 0 for i in range(n))) for j in range(n)]


def _spd_from_params(d: int, params: dict) -> np.ndarray:
    a = np.eye(d)
    for key, val in params.items():
        if key.startswith("a") and len(key) == 3 and key[1:].isdigit():
            i, j = int(key[1]) - 1, int(key[2]) - 1
            if not (0 <= i < d and 0 <= j < d):
                raise InputError(f"matrix entry {key!r} out of range for d={d}")
            a[i, j] = a[j, i] = float(val)
    return a


def _raufi_terms(s: float, corrected: bool) -> list[MatTerm]:
    # g = Id_2 - [[s x1^2 + x2^2, x1 x2], [x1 x2, (2,2) entry]],
    # with the (2,2) entry s x1^2 + x2^2 as printed, or x1^2 + s x2^2 corrected.
    e11 = np.array([[1.0, 0.0], [0.0, 0.0]])
    e22 = np.array([[0.0, 0.0], [0.0, 1.0]])
    e12 = np.array([[0.0, 1.0], [1.0, 0.0]])
    if corrected:
        sq1 = s * e11 + e22
        sq2 = e11 + s * e22
    else:
        sq1 = s * (e11 + e22)
        sq2 = e11 + e22
    return [
        ((0, 0), np.eye(2)),
        ((2, 0), -sq1),
        ((0, 2), -sq2),
        ((1, 1), -e12),
    ]


def builtin_field(name: str, params: dict | None = None, **jet_kwargs) -> MatrixField:
    """Construct one of the shipped fields by name.

    Matrix parameters of the SPD-envelope builtins are passed entrywise as
    ``a11``, ``a12``, ... in the params map (identity by default).
    """
    params = dict(params or {})
    if name == "gaussian_scalar":
        n = int(params.get("n", 1))
        return MatrixField(
            n, 1, _sq_norm_terms(n, 0.5), [((0,) * n, np.eye(1))], name=name, **jet_kwargs
        )
    if name == "gaussian_times_spd":
        n = int(params.get("n", 1))
        a = params.get("A")
        if a is None:
            d = int(params.get("d", 2))
            a = _spd_from_params(d, params)
        a = np.asarray(a, dtype=float)
        return MatrixField(
            n, a.shape[0], _sq_norm_terms(n, 1.0), [((0,) * n, a)], name=name, **jet_kwargs
        )
    if name in ("raufi_printed", "raufi_corrected"):
        s = float(params.get("s", 0.0))
        terms = _raufi_terms(s, corrected=(name == "raufi_corrected"))
        return MatrixField(2, 2, [], terms, name=name, **jet_kwargs)
    if name == "polynomial":
        return polynomial_field(
            int(params["n"]), int(params["d"]), params["entries"], **jet_kwargs
        )
    if name == "gaussian_cross_spd":
        # exp(-(x1^2 + x2^2 + c x1 x2)) * A, non-product in (t, y) for c != 0
        c = float(params.get("c", 0.5))
        a = params.get("A")
        if a is None:
            d = int(params.get("d", 2))
            a = _spd_from_params(d, params)
        a = np.asarray(a, dtype=float)
        q = _sq_norm_terms(2, 1.0) + [(c, (1, 1))]
        return MatrixField(2, a.shape[0], q, [((0, 0), a)], name=name, **jet_kwargs)
    if name == "perturbed_gaussian_spd":
        # exp(-|x|^2) * (Id + eps (x1 + x2) B): integrable, N-log-concave for
        # small eps, with a genuinely nonconstant matrix direction.
        eps = float(params.get("eps", 0.02))
        b = PERTURBATION_DIRECTION
        p = [((0, 0), np.eye(2)), ((1, 0), eps * b), ((0, 1), eps * b)]
        return MatrixField(2, 2, _sq_norm_terms(2, 1.0), p, name=name, **jet_kwargs)
    if name == "double_well_scalar":
        # exp(-((x1^2 - 1)^2 + x2^2)): integrable but not log-concave near 0.
        q = [(1.0, (4, 0)), (-2.0, (2, 0)), (1.0, (0, 0)), (1.0, (0, 2))]
        return MatrixField(2, 1, q, [((0, 0), np.eye(1))], name=name, **jet_kwargs)
    raise InputError(f"unknown builtin field {name!r}")


def polynomial_field(n: int, d: int, entries: dict, **jet_kwargs) -> MatrixField:
    """Field whose entries are polynomials, given per upper-triangle entry.

    ``entries`` maps "i,j" (1-based, i <= j) to a list of
    ``[coeff, [deg_1, ..., deg_n]]`` monomials.
    """
    terms: dict[tuple[int, ...], np.ndarray] = {}
    for key, monomials in entries.items():
        try:
            i_s, j_s = key.split(",")
            i, j = int(i_s) - 1, int(j_s) - 1
        except ValueError as exc:
            raise InputError(f"malformed entry key {key!r}") from exc
        if not (0 <= i <= j < d):
            raise InputError(f"entry key {key!r} out of range (need i <= j <= d)")
        for coeff, degs in monomials:
            degs = tuple(int(t) for t in degs)
            if len(degs) != n:
                raise InputError(f"degree tuple {degs} has wrong length")
            base = terms.setdefault(degs, np.zeros((d, d)))
            base[i, j] += float(coeff)
            if i != j:
                base[j, i] += float(coeff)
    return MatrixField(n, d, [], list(terms.items()), name="polynomial", **jet_kwargs)


def polynomial_field_from_json(path_or_obj, **jet_kwargs) -> MatrixField:
    """Load a polynomial field from the JSON schema used by the CLI."""
    if isinstance(path_or_obj, (str, bytes)):
        with open(path_or_obj) as fh:
            obj = json.load(fh)
    else:
        obj = path_or_obj
    try:
        return polynomial_field(int(obj["n"]), int(obj["d"]), obj["entries"], **jet_kwargs)
    except KeyError as exc:
        raise InputError(f"field JSON is missing key {exc}") from exc
