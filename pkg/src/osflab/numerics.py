"""Dense linear algebra used by every other module.

Matrices are plain numpy arrays (row-major floats, or complex for the
eigenvector routines). All routines validate shapes and finiteness and
raise :class:`InvalidInputError` rather than letting LAPACK fail obscurely.

Backed by LAPACK through numpy/scipy. A from-scratch Jacobi/QR stack was
considered and rejected: interpreted Python is orders of magnitude too slow
at the Hankel sizes the filter bank needs (up to 4095 x 4095).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import IllConditionedError, InvalidInputError

SYM_TOL = 1e-12          # relative asymmetry tolerance for sym_eigh
EIGENGAP_FLOOR = 1e-10   # below this, eig_vectors treats A as defective


def _as_matrix(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def _require_square(A, name="matrix"):
    A = _as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got {A.shape}")
    return A


def sym_eigh(S, top=None):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(values, vectors)`` with eigenvalues sorted descending and
    eigenvectors as orthonormal columns. With ``top=k`` only the k largest
    eigenpairs are computed (Lanczos for large matrices, full LAPACK
    otherwise); this is what the filter bank uses.

    Eigenvector signs are fixed so the largest-magnitude entry of each
    column is positive, which makes results deterministic across backends.
    """
    S = _require_square(S, "S")
    scale = np.linalg.norm(S)
    if scale > 0 and np.linalg.norm(S - S.T) > SYM_TOL * scale * S.shape[0]:
        raise InvalidInputError("matrix is not symmetric within tolerance")
    n = S.shape[0]
    if top is not None and not (1 <= top <= n):
        raise InvalidInputError(f"top must be in [1, {n}], got {top}")
    if top is not None and n > 1024 and top <= n // 8:
        # deterministic start vector; top eigenvalues of our use cases are
        # well separated so Lanczos converges quickly
        v0 = np.full(n, 1.0 / np.sqrt(n))
        vals, vecs = scipy.sparse.linalg.eigsh(S, k=top, which="LA", v0=v0)
    else:
        vals, vecs = np.linalg.eigh(S)
        if top is not None:
            vals, vecs = vals[-top:], vecs[:, -top:]
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    signs = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vals, vecs * signs


def eig_general(A):
    """Eigenvalues of a general square matrix.

    Returned sorted by real part then imaginary part, so conjugate pairs
    are adjacent.
    """
    A = _require_square(A, "A")
    return np.sort_complex(np.linalg.eigvals(A))


def eig_vectors(A):
    """Eigenvalues and unit-norm eigenvectors of a diagonalizable matrix.

    Raises :class:`IllConditionedError` (carrying the smallest eigengap)
    when the spectrum has a gap below ``EIGENGAP_FLOOR``, which is how
    defective and near-defective matrices surface here.
    """
    A = _require_square(A, "A")
    vals, vecs = np.linalg.eig(A)
    if A.shape[0] > 1:
        gaps = np.abs(vals[:, None] - vals[None, :])
        np.fill_diagonal(gaps, np.inf)
        gap = float(gaps.min())
        if gap <= EIGENGAP_FLOOR:
            raise IllConditionedError(
                f"matrix is numerically defective (min eigengap {gap:.3e})",
                eigengap=gap,
            )
    norms = np.linalg.norm(vecs, axis=0)
    return vals, vecs / norms


def lstsq(X, Y):
    """Least-squares solve of ``X @ W = Y`` in the Frobenius norm.

    Returns the minimum-norm solution when X is rank deficient.
    """
    X = _as_matrix(X, "X")
    Y = np.asarray(Y)
    y_was_vector = Y.ndim == 1
    if y_was_vector:
        Y = Y[:, None]
    Y = _as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(
            f"row mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}"
        )
    W = np.linalg.lstsq(X, Y, rcond=None)[0]
    return W[:, 0] if y_was_vector else W


def cond2(A):
    """Spectral condition number sigma_max / sigma_min.

    Exactly singular matrices return ``inf`` rather than raising, matching
    the convention that a non-diagonalizable closed loop has infinite
    conditioning.
    """
    A = _as_matrix(A, "A")
    if not A.size or not np.any(A):
        raise InvalidInputError("cond2 of an all-zero matrix is undefined")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] == 0.0 or s[-1] < np.finfo(float).tiny * max(A.shape):
        return float("inf")
    return float(s[0] / s[-1])


def project_fro_ball(theta, radius):
    """Euclidean/Frobenius projection onto the ball of the given radius."""
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    if norm <= radius:
        return theta
    return theta * (radius / norm)


# ---------------------------------------------------------------------------
# matrix text format: first line "rows cols", then whitespace-separated
# row-major entries; complex entries as "a+bi"
# ---------------------------------------------------------------------------

def _format_entry(v):
    if np.iscomplexobj(np.asarray(v)) and np.imag(v) != 0:
        return f"{np.real(v):.17g}{np.imag(v):+.17g}i"
    return f"{np.real(v):.17g}"


def _parse_entry(tok):
    if tok.endswith("i"):
        return complex(tok[:-1].replace("i", "j") + "j")
    return float(tok)


def save_matrix(path, A):
    A = np.atleast_2d(np.asarray(A))
    rows = [f"{A.shape[0]} {A.shape[1]}"]
    for r in A:
        rows.append(" ".join(_format_entry(v) for v in r))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def load_matrix(path):
    with open(path) as fh:
        toks = fh.read().split()
    if len(toks) < 2:
        raise InvalidInputError(f"{path}: missing 'rows cols' header")
    rows, cols = int(toks[0]), int(toks[1])
    body = toks[2:]
    if len(body) != rows * cols:
        raise InvalidInputError(
            f"{path}: expected {rows * cols} entries, found {len(body)}"
        )
    vals = [_parse_entry(t) for t in body]
    arr = np.array(vals)
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return arr.reshape(rows, cols)
