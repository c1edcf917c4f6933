"""Block eigensolver for the smallest eigenpairs of a symmetric operator.

Locally optimal block preconditioned conjugate gradient (LOBPCG) with
soft locking, explicit Gram matrices and a conditioning ladder. The
resident working set is two (n, 3l) arrays packing the iterate block X,
the residual block R and the search-direction block P together with
their operator images, i.e. six n-by-l multivectors in total no matter
how many iterations run. Updates are written in place; the only n-sized
transients are the buffers numpy itself uses to honor overlapping
``out=`` arguments and the products formed inside the operator.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConditioningError, ContractError, DomainError, SolverError

__all__ = [
    "SolverConfig",
    "EigenState",
    "DenseOperator",
    "random_init",
    "orthonormalize",
    "rayleigh_ritz",
    "lobpcg_solve",
    "residual_norms",
]

_COND_MAX = 1.0 / np.sqrt(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one eigensolve.

    ``tol`` and ``soft_lock_tol`` are relative to the operator scale
    (the larger of the top Ritz value and the operator's scale hint), so
    the same settings work for graphs of very different degree. Columns
    whose residual drops below the soft-lock threshold stop receiving
    search directions but keep being corrected by the Rayleigh-Ritz
    rotation. The lock threshold must sit below ``tol`` or columns
    freeze before they converge; by default it tracks ``tol`` at 0.1x.
    """

    block_size: int
    tol: float = 1e-4
    max_iter: int = 20
    seed: int = 0
    soft_lock_tol: float | None = None
    determinism: bool = False
    deflate_ones: bool = False

    def __post_init__(self):
        if self.block_size < 1:
            raise DomainError("block_size must be at least 1")
        if not (self.tol > 0):
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.soft_lock_tol is not None and self.soft_lock_tol < 0:
            raise DomainError("soft_lock_tol must be non-negative")

    @property
    def lock_tol(self) -> float:
        return 0.1 * self.tol if self.soft_lock_tol is None else self.soft_lock_tol

    @classmethod
    def high_accuracy(cls, block_size: int, **overrides) -> "SolverConfig":
        """Profile for reference-grade solves: tight tolerance, many iterations."""
        defaults = dict(tol=1e-10, max_iter=500)
        defaults.update(overrides)
        return cls(block_size=block_size, **defaults)

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class EigenState:
    """Result of an eigensolve; also the warm-start carrier between solves.

    ``converged`` holds one flag per column (residual below tol at the
    final scale). ``iterations`` counts basis-expansion steps, so a
    solve that enters already converged reports 0. ``work_blocks`` is
    the number of persistent n-by-block_size arrays the solve allocated.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residual_norms: np.ndarray
    iterations: int
    converged: np.ndarray
    work_blocks: int = 0

    @property
    def block_size(self) -> int:
        return int(self.vectors.shape[1])

    def all_converged(self, first: int | None = None) -> bool:
        return bool(np.all(self.converged[: first or len(self.converged)]))

    def save(self, path) -> None:
        np.savez(
            Path(path),
            eigenvalues=self.eigenvalues,
            vectors=self.vectors,
            residual_norms=self.residual_norms,
            iterations=np.int64(self.iterations),
            converged=np.asarray(self.converged, dtype=bool),
            work_blocks=np.int64(self.work_blocks),
        )

    @classmethod
    def load(cls, path) -> "EigenState":
        with np.load(Path(path)) as data:
            return cls(
                eigenvalues=data["eigenvalues"],
                vectors=data["vectors"],
                residual_norms=data["residual_norms"],
                iterations=int(data["iterations"]),
                converged=np.asarray(data["converged"], dtype=bool),
                work_blocks=int(data["work_blocks"]),
            )


class DenseOperator:
    """Wrap a dense symmetric matrix in the operator protocol."""

    def __init__(self, a: np.ndarray):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractError("operator matrix must be square")
        if not np.allclose(a, a.T, atol=1e-10 * max(1.0, np.abs(a).max())):
            raise ContractError("operator matrix must be symmetric")
        self.a = a
        self.n = a.shape[0]
        self.scale_hint = float(np.abs(a).sum(axis=1).max()) if self.n else 1.0

    def apply(self, x: np.ndarray, out=None) -> np.ndarray:
        if out is None:
            return self.a @ x
        np.matmul(self.a, x, out=out)
        return out

    __call__ = apply


def random_init(n: int, block_size: int, seed: int = 0) -> np.ndarray:
    """Gaussian random starting block, the standard cold start."""
    if block_size < 1:
        raise DomainError("block_size must be at least 1")
    if block_size > n:
        raise DomainError(f"block_size {block_size} exceeds dimension {n}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, block_size))


def _sym(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.T)


def _small_gen_eigh(gram_a: np.ndarray, gram_b: np.ndarray):
    """Generalized symmetric eigensolve of the small projected problem."""
    if not (np.isfinite(gram_a).all() and np.isfinite(gram_b).all()):
        raise ConditioningError("projected matrices contain non-finite entries")
    if np.linalg.cond(gram_b) > _COND_MAX:
        raise ConditioningError("projected overlap matrix is ill-conditioned")
    try:
        return scipy.linalg.eigh(gram_a, gram_b)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ConditioningError(str(exc)) from exc


def rayleigh_ritz(operator, basis: np.ndarray):
    """Project the operator on span(basis) and diagonalize.

    Returns all Ritz values in ascending order and the coefficient
    matrix mapping basis columns to Ritz vectors. Raises
    ConditioningError when the basis is too ill-conditioned to project
    reliably.
    """
    basis = np.asarray(basis, dtype=np.float64)
    image = operator.apply(basis)
    gram_a = _sym(basis.T @ image)
    gram_b = _sym(basis.T @ basis)
    return _small_gen_eigh(gram_a, gram_b)


def orthonormalize(x: np.ndarray, rng=None) -> np.ndarray:
    """Orthonormalize the columns of x in place, repairing rank loss.

    Dependent columns are replaced with fresh Gaussian directions, so
    the result always has full column rank. Raises ConditioningError if
    repair fails repeatedly and DomainError if there are more columns
    than rows.
    """
    if x.shape[1] > x.shape[0]:
        raise DomainError("cannot orthonormalize: more columns than rows")
    if not np.any(x):
        raise DomainError("cannot orthonormalize an all-zero block")
    if rng is None:
        rng = np.random.default_rng(0)
    width = x.shape[1]
    for _ in range(5):
        kept = _cholesky_orth(x)
        if kept == width:
            return x
        x[:, kept:] = rng.standard_normal((x.shape[0], width - kept))
    raise ConditioningError("could not build a full-rank orthonormal block")


def _cholesky_orth(b: np.ndarray) -> int:
    """Orthonormalize b in place; returns the retained width.

    Fast path is Cholesky of the Gram matrix. On failure the block is
    replaced by an orthonormal basis of its column span (pivoted QR) and
    the numerical rank is returned; trailing columns are garbage.
    """
    na = b.shape[1]
    if na == 0:
        return 0
    gram = _sym(b.T @ b)
    diag = np.diag(gram)
    eps = np.finfo(np.float64).eps
    if np.all(diag > 0) and np.min(diag) > (eps * na) ** 2 * np.max(diag):
        try:
            chol = np.linalg.cholesky(gram)
            rdiag = np.diag(chol)
            if np.min(rdiag) > np.sqrt(eps) * np.max(rdiag):
                inv = scipy.linalg.solve_triangular(chol.T, np.eye(na), lower=False)
                np.matmul(b, inv, out=b)
                return na
        except np.linalg.LinAlgError:
            pass
    q, r, _ = scipy.linalg.qr(b, mode="economic", pivoting=True)
    rdiag = np.abs(np.diag(r))
    if rdiag.size == 0 or rdiag[0] == 0:
        return 0
    rank = int(np.sum(rdiag > max(b.shape) * np.finfo(np.float64).eps * rdiag[0]))
    b[:, :rank] = q[:, :rank]
    return rank


def _move_columns(arr: np.ndarray, dst_start: int, src_start: int, idx) -> None:
    """Gather columns src_start+idx to dst_start.. (left-moving, in place)."""
    for j, s in enumerate(idx):
        d = dst_start + j
        s = src_start + int(s)
        if d != s:
            arr[:, d] = arr[:, s]


def _project_out_ones(block: np.ndarray) -> None:
    block -= block.mean(axis=0, keepdims=True)


def lobpcg_solve(
    operator,
    x0: np.ndarray,
    config: SolverConfig,
    precond=None,
    n_converge: int | None = None,
    callback=None,
) -> EigenState:
    """Compute the smallest eigenpairs of a symmetric operator.

    ``operator`` exposes ``n``, ``scale_hint`` and ``apply(x, out=None)``.
    ``x0`` is the (n, block_size) starting block; pass a previous
    solution here to warm-start. Convergence requires the residuals of
    the first ``n_converge`` columns (default: all) to fall below
    ``tol * scale``. Running out of iterations returns an unconverged
    state; non-finite arithmetic or an unrecoverable projection raises
    SolverError carrying the last valid state.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    n = operator.n
    if x0.ndim != 2 or x0.shape[0] != n:
        raise ContractError(f"x0 must be ({n}, block_size)")
    l = x0.shape[1]
    if l != config.block_size:
        raise ContractError(
            f"x0 has {l} columns but config.block_size is {config.block_size}"
        )
    if l > n:
        raise DomainError(f"block_size {l} exceeds operator dimension {n}")
    nc = l if n_converge is None else int(n_converge)
    if not 1 <= nc <= l:
        raise DomainError("n_converge must be in [1, block_size]")
    rng = np.random.default_rng(config.seed)

    # Working set: [X | R | P] and [LX | LR | LP], six n-by-l blocks.
    big = np.empty((n, 3 * l), order="C")
    lbig = np.empty((n, 3 * l), order="C")
    work_blocks = 6
    x = big[:, :l]
    lx = lbig[:, :l]

    x[:] = x0
    if config.deflate_ones:
        _project_out_ones(x)
    orthonormalize(x, rng)
    operator.apply(x, out=lx)

    def make_state(theta, norms, iterations, scale):
        norms = np.asarray(norms, dtype=np.float64).copy()
        return EigenState(
            eigenvalues=np.array(theta[:l], dtype=np.float64),
            vectors=big[:, :l].copy(),
            residual_norms=norms,
            iterations=iterations,
            converged=norms < config.tol * scale,
            work_blocks=work_blocks,
        )

    try:
        theta, coeff = _small_gen_eigh(_sym(x.T @ lx), _sym(x.T @ x))
    except ConditioningError as exc:
        raise SolverError(
            f"initial projection failed: {exc}",
            state=None,
        ) from exc
    np.matmul(x, coeff, out=x)
    np.matmul(lx, coeff, out=lx)

    active = np.ones(l, dtype=bool)
    have_p = False
    p_width = 0
    iterations = 0
    norms = np.zeros(l)

    for it in range(config.max_iter + 1):
        r_full = big[:, l : 2 * l]
        np.multiply(x, theta[None, :l], out=r_full)
        np.subtract(lx, r_full, out=r_full)
        norms = np.linalg.norm(r_full, axis=0)
        scale = max(abs(float(theta[l - 1])), operator.scale_hint, np.finfo(np.float64).tiny)
        if not np.isfinite(norms).all():
            raise SolverError(
                "residual norms are not finite",
                state=make_state(theta, norms, iterations, scale),
            )
        if callback is not None:
            callback(it, np.array(theta[:l]), norms.copy())
        if np.all(norms[:nc] < config.tol * scale) or it == config.max_iter:
            break
        active &= norms >= config.lock_tol * scale
        if not active.any():
            break
        iterations += 1

        idx = np.flatnonzero(active)
        na = idx.size
        _move_columns(big, l, l, idx)
        r_act = big[:, l : l + na]
        if precond is not None:
            r_act[:] = precond(r_act)
        if config.deflate_ones:
            _project_out_ones(r_act)
        # project the active residuals out of span(X); LR is dead scratch here
        coupling = x.T @ r_act
        scratch = lbig[:, l : l + na]
        np.matmul(x, coupling, out=scratch)
        r_act -= scratch
        na = _cholesky_orth(r_act)
        if na == 0:
            break
        r_act = big[:, l : l + na]
        operator.apply(r_act, out=lbig[:, l : l + na])

        if have_p:
            # keep directions of still-active columns, packed after R
            _move_columns(big, l + na, 2 * l, idx)
            _move_columns(lbig, l + na, 2 * l, idx)
            p_act = big[:, l + na : l + na + idx.size]
            lp_act = lbig[:, l + na : l + na + idx.size]
            p_norms = np.linalg.norm(p_act, axis=0)
            keep = np.flatnonzero(p_norms > 0)
            if keep.size < idx.size:
                _move_columns(big, l + na, l + na, keep)
                _move_columns(lbig, l + na, l + na, keep)
            p_width = keep.size
            if p_width:
                p_act = big[:, l + na : l + na + p_width]
                lp_act = lbig[:, l + na : l + na + p_width]
                inv_norms = 1.0 / p_norms[keep]
                p_act *= inv_norms[None, :]
                lp_act *= inv_norms[None, :]
        else:
            p_width = 0

        theta_new = coeff_new = None
        for ladder in ("full", "drop_p", "rebuild"):
            if ladder == "drop_p":
                if p_width == 0:
                    continue
                p_width = 0
            elif ladder == "rebuild":
                orthonormalize(x, rng)
                operator.apply(x, out=lx)
                coupling = x.T @ r_act
                np.matmul(x, coupling, out=lbig[:, l : l + na])
                r_act -= lbig[:, l : l + na]
                na = _cholesky_orth(r_act)
                if na == 0:
                    break
                r_act = big[:, l : l + na]
                operator.apply(r_act, out=lbig[:, l : l + na])
            m = l + na + p_width
            basis = big[:, :m]
            image = lbig[:, :m]
            try:
                values, vectors = _small_gen_eigh(_sym(basis.T @ image), _sym(basis.T @ basis))
            except ConditioningError:
                continue
            theta_new, coeff_new = values, vectors
            break
        if theta_new is None:
            if na == 0:
                break
            raise SolverError(
                "projected eigenproblem unsolvable after restart",
                state=make_state(theta, norms, iterations, scale),
            )

        theta = theta_new
        coeff = coeff_new[:, :l]
        m = l + na + p_width
        basis = big[:, :m]
        image = lbig[:, :m]
        np.matmul(basis, coeff, out=big[:, :l])
        np.matmul(image, coeff, out=lbig[:, :l])
        np.matmul(big[:, l:m], coeff[l:], out=big[:, 2 * l : 3 * l])
        np.matmul(lbig[:, l:m], coeff[l:], out=lbig[:, 2 * l : 3 * l])
        have_p = True

    # polish: re-orthonormalize, re-project, report residuals that the
    # returned quantities actually satisfy
    orthonormalize(x, rng)
    operator.apply(x, out=lx)
    theta, coeff = _small_gen_eigh(_sym(x.T @ lx), np.eye(l))
    np.matmul(x, coeff, out=x)
    np.matmul(lx, coeff, out=lx)
    r_full = big[:, l : 2 * l]
    np.multiply(x, theta[None, :], out=r_full)
    np.subtract(lx, r_full, out=r_full)
    norms = np.linalg.norm(r_full, axis=0)
    scale = max(abs(float(theta[l - 1])), operator.scale_hint, np.finfo(np.float64).tiny)
    return make_state(theta, norms, iterations, scale)


def residual_norms(operator, state: EigenState) -> np.ndarray:
    """Recompute ||L x_i - lambda_i x_i|| from scratch for validation."""
    image = operator.apply(state.vectors)
    image -= state.vectors * state.eigenvalues[None, :]
    return np.linalg.norm(image, axis=0)
