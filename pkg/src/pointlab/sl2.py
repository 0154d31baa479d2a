"""SL(2,R) transfer-matrix algebra for 1-D point-interaction Hamiltonians.

A cell of length ell at energy E contributes the free monodromy

    T(E, ell) = [[ c,      s ],
                 [ -E*s,   c ]],    c = cos(sqrt(E) ell),  s = sin(sqrt(E) ell)/sqrt(E),

interpreted through cosh/sinh for E < 0 and by power series near E = 0, so every
entry is analytic in E.  A vertex coupling B in SL(2,R) acts on the trace data
(u, u') from the left, giving the one-cell transfer matrix B @ T(E, ell).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError, InvalidMatrixError

MAT2_DET_TOL = 1e-12
TRANSFER_DET_TOL = 1e-8
STRUCTURAL_TOL = 1e-10

# Frobenius thresholds for scale extraction inside long products.
_RENORM_UP = 1e100
_RENORM_DOWN = 1e-100

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

# power-series window for the generalized cosine/sine pair
_SERIES_CUT = 1e-6

# 1/(2k)! and 1/(2k+1)! for k = 0..7
_COS_COEF = [1.0, 1.0 / 2, 1.0 / 24, 1.0 / 720, 1.0 / 40320, 1.0 / 3628800,
             1.0 / 479001600, 1.0 / 87178291200]
_SIN_COEF = [1.0, 1.0 / 6, 1.0 / 120, 1.0 / 5040, 1.0 / 362880, 1.0 / 39916800,
             1.0 / 6227020800, 1.0 / 1307674368000]


def as_mat2(m, det_tol: float = MAT2_DET_TOL) -> np.ndarray:
    """Validate and return a real 2x2 matrix with unit determinant."""
    a = np.asarray(m, dtype=float)
    if a.shape != (2, 2):
        raise InvalidMatrixError(f"expected shape (2, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix entries must be finite")
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det - 1.0) > det_tol:
        raise InvalidMatrixError(f"determinant {det!r} differs from 1 beyond {det_tol:g}")
    return a


def opnorm2(m) -> float:
    """Largest singular value of a 2x2 matrix, in closed form.

    Uses the rotation/reflection split sigma_max = (hypot(a+d, b-c) +
    hypot(a-d, b+c)) / 2, which is free of cancellation and cannot overflow
    unless the result itself does.
    """
    a = np.asarray(m, dtype=float)
    s1 = math.hypot(a[0, 0] + a[1, 1], a[0, 1] - a[1, 0])
    s2 = math.hypot(a[0, 0] - a[1, 1], a[0, 1] + a[1, 0])
    return 0.5 * (s1 + s2)


def _series_cs(x: float, ell: float) -> tuple[float, float]:
    # Horner evaluation in x = E ell^2; 8 terms, plenty below the 1e-6 cut
    c = _COS_COEF[7]
    s = _SIN_COEF[7]
    for k in range(6, -1, -1):
        c = _COS_COEF[k] - x * c
        s = _SIN_COEF[k] - x * s
    return c, ell * s


def cs(E: float, ell: float) -> tuple[float, float]:
    """Generalized cosine/sine pair (c, s) of the free flow over length ell.

    c and s solve -y'' = E y with (c, c')(0) = (1, 0) and (s, s')(0) = (0, 1);
    both are entire in E.
    """
    x = E * ell * ell
    if abs(x) < _SERIES_CUT:
        return _series_cs(x, ell)
    if E > 0.0:
        w = math.sqrt(E)
        return math.cos(w * ell), math.sin(w * ell) / w
    k = math.sqrt(-E)
    return math.cosh(k * ell), math.sinh(k * ell) / k


def _cs_grid(E: np.ndarray, ell: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cs() over an array of energies (scalar ell)."""
    E = np.asarray(E, dtype=float)
    c = np.empty_like(E)
    s = np.empty_like(E)
    x = E * ell * ell
    tiny = np.abs(x) < _SERIES_CUT
    pos = (E > 0.0) & ~tiny
    neg = (E < 0.0) & ~tiny
    if np.any(pos):
        w = np.sqrt(E[pos])
        c[pos] = np.cos(w * ell)
        s[pos] = np.sin(w * ell) / w
    if np.any(neg):
        k = np.sqrt(-E[neg])
        c[neg] = np.cosh(k * ell)
        s[neg] = np.sinh(k * ell) / k
    if np.any(tiny):
        ct = np.full(np.count_nonzero(tiny), _COS_COEF[7])
        st = np.full(np.count_nonzero(tiny), _SIN_COEF[7])
        xt = x[tiny]
        for k in range(6, -1, -1):
            ct = _COS_COEF[k] - xt * ct
            st = _SIN_COEF[k] - xt * st
        c[tiny] = ct
        s[tiny] = ell * st
    return c, s


def monodromy(E: float, ell: float) -> np.ndarray:
    """Free monodromy matrix of one cell: trace data (u, u') across length ell.

    det = 1 to 1e-12 absolute in the oscillatory regime; deep hyperbolic cells
    (sqrt(-E)*ell >> 1) are limited to eps * cosh^2 by float64 cancellation.
    """
    if not (isinstance(E, (int, float)) and math.isfinite(E)):
        raise DomainError(f"energy must be finite, got {E!r}")
    if not (isinstance(ell, (int, float)) and math.isfinite(ell) and ell > 0.0):
        raise DomainError(f"cell length must be finite and positive, got {ell!r}")
    c, s = cs(float(E), float(ell))
    return np.array([[c, s], [-E * s, c]])


def transfer(E: float, ell: float, B) -> np.ndarray:
    """One-cell transfer matrix: vertex coupling B applied after the free flow."""
    b = as_mat2(B, det_tol=TRANSFER_DET_TOL)
    return b @ monodromy(E, ell)


# --------------------------------------------------------------------------
# growth of long ordered products
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _product_kernel(mats, idx):
    """Ordered product mats[idx[n-1]] @ ... @ mats[idx[0]] with scale extraction.

    Returns (log of the 2-norm of the product, unit image of e1).
    """
    a = 1.0
    b = 0.0
    c = 0.0
    d = 1.0
    logscale = 0.0
    vx = 1.0
    vy = 0.0
    vlog = 0.0
    for s in range(idx.shape[0]):
        k = idx[s]
        m11 = mats[k, 0, 0]
        m12 = mats[k, 0, 1]
        m21 = mats[k, 1, 0]
        m22 = mats[k, 1, 1]
        na = m11 * a + m12 * c
        nb = m11 * b + m12 * d
        nc = m21 * a + m22 * c
        nd = m21 * b + m22 * d
        a = na
        b = nb
        c = nc
        d = nd
        f2 = a * a + b * b + c * c + d * d
        if f2 > 1e240 or f2 < 1e-240:
            f = math.sqrt(f2)
            a /= f
            b /= f
            c /= f
            d /= f
            logscale += math.log(f)
        nvx = m11 * vx + m12 * vy
        nvy = m21 * vx + m22 * vy
        vx = nvx
        vy = nvy
        g2 = vx * vx + vy * vy
        if g2 > 1e240 or g2 < 1e-240:
            g = math.sqrt(g2)
            vx /= g
            vy /= g
            vlog += math.log(g)
    # top singular value via the rotation/reflection split: cancellation
    # free, and safe against overflow at any in-window scale
    s1 = math.hypot(a + d, b - c)
    s2 = math.hypot(a - d, b + c)
    smax = 0.5 * (s1 + s2)
    g = math.sqrt(vx * vx + vy * vy)
    return logscale + math.log(smax), vx / g, vy / g


def product_lognorm(mats) -> tuple[float, np.ndarray]:
    """log of the 2-norm of an ordered matrix product, safe against overflow.

    ``mats`` is a sequence of 2x2 arrays; element 0 is applied first (rightmost
    factor).  Also returns the normalized image of the start vector e1.
    Internally the running product sheds its Frobenius scale whenever it leaves
    [1e-120, 1e120], so products of up to ~1e7 factors with |log norm| up to
    1e5 stay representable.
    """
    stack = np.ascontiguousarray(np.asarray(mats, dtype=float))
    if stack.ndim == 2:
        stack = stack[None, :, :]
    if stack.ndim != 3 or stack.shape[1:] != (2, 2):
        raise InvalidMatrixError(f"expected a sequence of 2x2 matrices, got shape {stack.shape}")
    if stack.shape[0] == 0:
        return 0.0, np.array([1.0, 0.0])
    if not np.all(np.isfinite(stack)):
        raise InvalidMatrixError("matrix entries must be finite")
    idx = np.arange(stack.shape[0], dtype=np.int64)
    lognorm, vx, vy = _product_kernel(stack, idx)
    if not math.isfinite(lognorm):
        raise DomainError("product norm degenerated (singular factors?)")
    return lognorm, np.array([vx, vy])


@dataclass
class LogNormAccumulator:
    """Streaming left-product with on-the-fly scale extraction.

    ``push`` applies one more factor on the left; ``log_opnorm`` reconstructs
    log of the 2-norm of everything pushed so far.
    """

    current: np.ndarray = field(default_factory=lambda: np.eye(2))
    log_scale: float = 0.0
    steps: int = 0

    def push(self, m) -> None:
        self.current = np.asarray(m, dtype=float) @ self.current
        f2 = float(np.sum(self.current * self.current))
        if f2 > _RENORM_UP**2 or f2 < _RENORM_DOWN**2:
            f = math.sqrt(f2)
            self.current = self.current / f
            self.log_scale += math.log(f)
        self.steps += 1

    @property
    def log_opnorm(self) -> float:
        return self.log_scale + math.log(opnorm2(self.current))


def chain(earlier: LogNormAccumulator, later: LogNormAccumulator) -> LogNormAccumulator:
    """Accumulator for the concatenated product: ``later`` applied after ``earlier``."""
    out = LogNormAccumulator(
        current=later.current @ earlier.current,
        log_scale=earlier.log_scale + later.log_scale,
        steps=earlier.steps + later.steps,
    )
    f2 = float(np.sum(out.current * out.current))
    if f2 > _RENORM_UP**2 or f2 < _RENORM_DOWN**2:
        f = math.sqrt(f2)
        out.current = out.current / f
        out.log_scale += math.log(f)
    return out


# --------------------------------------------------------------------------
# Iwasawa factorization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IwasawaFactors:
    """Unique factorization B = sign * R(t) D(b) S(q), t in [0, pi), b > 0.

    R(t) is the rotation [[cos t, -sin t], [sin t, cos t]], D(b) = diag(b, 1/b),
    and S(q) is the lower unipotent shear [[1, 0], [q, 1]].
    """

    sign: float
    t: float
    b: float
    q: float

    def recompose(self) -> np.ndarray:
        rot = np.array([[math.cos(self.t), -math.sin(self.t)],
                        [math.sin(self.t), math.cos(self.t)]])
        dia = np.array([[self.b, 0.0], [0.0, 1.0 / self.b]])
        shr = np.array([[1.0, 0.0], [self.q, 1.0]])
        return self.sign * rot @ dia @ shr


def iwasawa(B) -> IwasawaFactors:
    """Factor B in SL(2,R) as sign * R(t) D(b) S(q) with t in [0, pi), b > 0."""
    m = as_mat2(B)
    b11, b12 = m[0, 0], m[0, 1]
    b21, b22 = m[1, 0], m[1, 1]
    t = math.atan2(-b12, b22)
    sign = 1.0
    if t < 0.0:
        t += math.pi
        sign = -1.0
    elif t >= math.pi:
        t -= math.pi
        sign = -1.0
    scale = 1.0 / math.hypot(b12, b22)
    # pairwise products are invariant under the global sign flip
    q = (b11 * b12 + b21 * b22) * scale * scale
    return IwasawaFactors(sign=sign, t=t, b=scale, q=q)


# --------------------------------------------------------------------------
# commutator criterion for pairs of interaction atoms
# --------------------------------------------------------------------------

def phase_equal(B1, B2, tol: float = STRUCTURAL_TOL) -> bool:
    """True if B1 = B2 or B1 = -B2 entrywise within tol."""
    a = np.asarray(B1, dtype=float)
    b = np.asarray(B2, dtype=float)
    return bool(np.max(np.abs(a - b)) <= tol or np.max(np.abs(a + b)) <= tol)


def commutator_G(ell1: float, B1, ell2: float, B2, E: float) -> np.ndarray:
    """Commutator of the two one-cell transfer matrices at energy E."""
    m1 = transfer(E, ell1, B1)
    m2 = transfer(E, ell2, B2)
    return m1 @ m2 - m2 @ m1


def commutes_identically(ell1: float, B1, ell2: float, B2,
                         tol: float = STRUCTURAL_TOL) -> bool:
    """Whether the two transfer matrices commute at every energy.

    This holds exactly when the atoms coincide up to sign (equal lengths and
    B1 = +/-B2), or both couplings are +/-identity (pure free flow, any
    lengths).  Decided structurally; no energy scan involved.
    """
    b1 = as_mat2(B1, det_tol=TRANSFER_DET_TOL)
    b2 = as_mat2(B2, det_tol=TRANSFER_DET_TOL)
    eye = np.eye(2)
    if phase_equal(b1, eye, tol) and phase_equal(b2, eye, tol):
        return True
    return abs(ell1 - ell2) <= tol and phase_equal(b1, b2, tol)


def scan_energies(n: int = 200) -> np.ndarray:
    """Golden-ratio spaced probe energies covering [-10, 100)."""
    k = np.arange(1, n + 1, dtype=float)
    return -10.0 + (110.0 * k * _GOLDEN) % 110.0


def commutator_scan_max(ell1: float, B1, ell2: float, B2, n: int = 200) -> float:
    """Max Frobenius norm of the transfer commutator over the probe grid."""
    b1 = as_mat2(B1, det_tol=TRANSFER_DET_TOL)
    b2 = as_mat2(B2, det_tol=TRANSFER_DET_TOL)
    E = scan_energies(n)
    c1, s1 = _cs_grid(E, ell1)
    c2, s2 = _cs_grid(E, ell2)
    t1 = np.empty((E.size, 2, 2))
    t1[:, 0, 0] = c1
    t1[:, 0, 1] = s1
    t1[:, 1, 0] = -E * s1
    t1[:, 1, 1] = c1
    t2 = np.empty_like(t1)
    t2[:, 0, 0] = c2
    t2[:, 0, 1] = s2
    t2[:, 1, 0] = -E * s2
    t2[:, 1, 1] = c2
    m1 = np.einsum("ij,njk->nik", b1, t1)
    m2 = np.einsum("ij,njk->nik", b2, t2)
    g = m1 @ m2 - m2 @ m1
    return float(np.max(np.sqrt(np.sum(g * g, axis=(1, 2)))))
