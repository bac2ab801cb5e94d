"""Dictionary-based reconstruction: patching, FISTA sparse coding, training.

A light field is cut into overlapping 5D patches, each patch is sparse
coded against a learned overcomplete dictionary, and the reconstruction is
assembled by averaging overlapping patches.  The dictionary is trained by
alternating minimization: FISTA (Beck & Teboulle 2009) for the codes with
the dictionary fixed, then mini-batch SGD on the atoms with the codes
fixed, renormalizing every atom to unit l2 norm after each update.

Sparse coding minimizes  ||x - D a||_2^2 + lam * ||a||_1  (that scaling
makes the identity-dictionary solution the soft threshold at lam / 2).
Reconstruction from coded measurements folds the binary mask into the
residual:  ||m * x - m * (D a)||_2^2 + lam * ||a||_1;  since the mask is a
projection, the same Lipschitz bound applies and FISTA is reused as is.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import coding
from .tensor import as_tensor5

DICT_MAGIC = b"LFDC"
_DICT_HEADER = struct.Struct("<4s2I")

# Desk-scale default atom shape; overlaps follow the same spatial/angular split
# as the production-scale preset below.
DEFAULT_ATOM_SHAPE = (3, 3, 6, 6, 5)
PRODUCTION_ATOM_SHAPE = (5, 5, 8, 8, 13)
DEFAULT_SPATIAL_OVERLAP = (4, 4)
DEFAULT_ANGULAR_OVERLAP = (1, 1)


@dataclass(frozen=True)
class PatchGrid:
    """Tiling of a source tensor into overlapping patches.

    Origins along each axis are multiples of (atom - overlap), with a final
    origin clamped to (dim - atom) so the far edge is always covered.  The
    spectral axis is never patched: the atom spans all channels.
    """

    source_dims: tuple[int, int, int, int, int]
    atom_dims: tuple[int, int, int, int, int]
    spatial_overlap: tuple[int, int]
    angular_overlap: tuple[int, int]
    origins: tuple[tuple[int, int, int, int], ...]

    @property
    def atom_len(self) -> int:
        return int(np.prod(self.atom_dims))

    @property
    def n_patches(self) -> int:
        return len(self.origins)


def _axis_origins(dim: int, atom: int, overlap: int) -> list[int]:
    if atom > dim:
        raise ValueError(f"atom extent {atom} exceeds source extent {dim}")
    if overlap >= atom:
        raise ValueError(f"overlap {overlap} must be smaller than atom {atom}")
    stride = atom - overlap
    origins = list(range(0, dim - atom + 1, stride))
    if origins[-1] != dim - atom:
        origins.append(dim - atom)
    return origins


def make_patch_grid(
    source_dims: tuple[int, int, int, int, int],
    atom_dims: tuple[int, int, int, int, int] = DEFAULT_ATOM_SHAPE,
    spatial_overlap: tuple[int, int] = DEFAULT_SPATIAL_OVERLAP,
    angular_overlap: tuple[int, int] = DEFAULT_ANGULAR_OVERLAP,
) -> PatchGrid:
    """Build the patch grid for a source tensor."""
    if atom_dims[4] != source_dims[4]:
        raise ValueError(
            f"atoms span all {source_dims[4]} channels, got {atom_dims[4]}"
        )
    o_u, o_v = angular_overlap
    o_s, o_t = spatial_overlap
    # Clamp overlaps where the atom fills the axis (stride would be <= 0).
    per_axis = [
        _axis_origins(source_dims[0], atom_dims[0], min(o_u, atom_dims[0] - 1)),
        _axis_origins(source_dims[1], atom_dims[1], min(o_v, atom_dims[1] - 1)),
        _axis_origins(source_dims[2], atom_dims[2], min(o_s, atom_dims[2] - 1)),
        _axis_origins(source_dims[3], atom_dims[3], min(o_t, atom_dims[3] - 1)),
    ]
    origins = tuple(
        (u, v, s, t)
        for u in per_axis[0]
        for v in per_axis[1]
        for s in per_axis[2]
        for t in per_axis[3]
    )
    return PatchGrid(
        source_dims=tuple(int(d) for d in source_dims),
        atom_dims=tuple(int(d) for d in atom_dims),
        spatial_overlap=(int(o_s), int(o_t)),
        angular_overlap=(int(o_u), int(o_v)),
        origins=origins,
    )


def patch(l: np.ndarray, g: PatchGrid) -> np.ndarray:
    """Extract all patches of `l`, one vectorized patch per row."""
    l = np.asarray(l)
    if l.shape != g.source_dims:
        raise ValueError(f"tensor {l.shape} does not match grid {g.source_dims}")
    a_u, a_v, a_s, a_t, n_c = g.atom_dims
    out = np.empty((g.n_patches, g.atom_len), dtype=np.float64)
    for i, (u, v, s, t) in enumerate(g.origins):
        out[i] = l[u : u + a_u, v : v + a_v, s : s + a_s, t : t + a_t, :].ravel()
    return out


def coverage_counts(g: PatchGrid) -> np.ndarray:
    """How many patches cover each source element (always >= 1)."""
    counts = np.zeros(g.source_dims, dtype=np.int64)
    a_u, a_v, a_s, a_t, _ = g.atom_dims
    for u, v, s, t in g.origins:
        counts[u : u + a_u, v : v + a_v, s : s + a_s, t : t + a_t, :] += 1
    return counts


def depatch(patches: np.ndarray, g: PatchGrid) -> np.ndarray:
    """Assemble patches back into a tensor, averaging overlapping values."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (g.n_patches, g.atom_len):
        raise ValueError(
            f"expected {(g.n_patches, g.atom_len)} patch matrix, got {patches.shape}"
        )
    acc = np.zeros(g.source_dims, dtype=np.float64)
    a_u, a_v, a_s, a_t, _ = g.atom_dims
    for i, (u, v, s, t) in enumerate(g.origins):
        acc[u : u + a_u, v : v + a_v, s : s + a_s, t : t + a_t, :] += patches[
            i
        ].reshape(g.atom_dims)
    acc /= coverage_counts(g)
    return acc.astype(np.float32)


@dataclass
class Dictionary:
    """Overcomplete dictionary; columns are unit-norm atoms."""

    atoms: np.ndarray  # (atom_len, n_atoms), float64

    @property
    def atom_len(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    def normalize(self) -> None:
        norms = np.linalg.norm(self.atoms, axis=0)
        norms[norms < 1e-30] = 1.0
        self.atoms /= norms


def write_dictionary(d: Dictionary, path) -> None:
    """Write a dictionary: magic "LFDC", u32 atom_len, u32 n_atoms, then
    float32 atoms in column-major order (atom after atom)."""
    with open(path, "wb") as fh:
        fh.write(_DICT_HEADER.pack(DICT_MAGIC, d.atom_len, d.n_atoms))
        fh.write(
            np.asarray(d.atoms, dtype="<f4").ravel(order="F").tobytes()
        )


def read_dictionary(path) -> Dictionary:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DICT_HEADER.size or raw[:4] != DICT_MAGIC:
        raise ValueError(f"{path}: not an LFDC dictionary file")
    _, atom_len, n_atoms = _DICT_HEADER.unpack_from(raw)
    n = atom_len * n_atoms
    payload = raw[_DICT_HEADER.size :]
    if len(payload) != 4 * n:
        raise ValueError(f"{path}: payload size mismatch")
    atoms = (
        np.frombuffer(payload, dtype="<f4", count=n)
        .astype(np.float64)
        .reshape((atom_len, n_atoms), order="F")
    )
    return Dictionary(atoms=np.ascontiguousarray(atoms))


def lipschitz_bound(d: Dictionary, n_power_iters: int = 30, seed: int = 0) -> float:
    """Largest eigenvalue of D^T D estimated by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d.n_atoms)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(n_power_iters):
        w = d.atoms.T @ (d.atoms @ v)
        lam = float(np.linalg.norm(w))
        if lam < 1e-30:
            return 1.0
        v = w / lam
    return lam


def _soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _fista(
    d: Dictionary,
    x: np.ndarray,
    lam: float,
    iters: int,
    mask: np.ndarray | None = None,
    lip: float | None = None,
) -> np.ndarray:
    """Monotone FISTA on columns of x; optional per-column binary mask.

    Objective per column:  ||m*(x - D a)||^2 + lam*||a||_1.  The momentum
    sequence restarts whenever a candidate step would increase the
    objective, so the kept iterates are non-increasing in objective.
    """
    atoms = d.atoms
    if lip is None:
        lip = lipschitz_bound(d)
    step = 1.0 / (2.0 * lip)
    thresh = lam * step

    def objective(a):
        r = x - atoms @ a
        if mask is not None:
            r = mask * r
        return np.sum(r * r, axis=0) + lam * np.abs(a).sum(axis=0)

    a = np.zeros((d.n_atoms, x.shape[1]), dtype=np.float64)
    y = a.copy()
    t = 1.0
    f_a = objective(a)
    for _ in range(iters):
        r = atoms @ y - x
        if mask is not None:
            r = mask * r
        z = _soft_threshold(y - step * (2.0 * atoms.T @ r), thresh)
        f_z = objective(z)
        worse = f_z > f_a
        if np.any(worse):
            # Monotone restart: keep the previous iterate, drop momentum.
            z[:, worse] = a[:, worse]
            f_z = np.where(worse, f_a, f_z)
            t_new = 1.0
            y = z.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z + ((t - 1.0) / t_new) * (z - a)
        a, f_a, t = z, f_z, t_new
    return a


def fista_encode(d: Dictionary, x: np.ndarray, lam: float, iters: int) -> np.ndarray:
    """Sparse code a single patch vector against the dictionary."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    if x.shape[0] != d.atom_len:
        raise ValueError(f"patch length {x.shape[0]} != atom length {d.atom_len}")
    return _fista(d, x, lam, iters)[:, 0]


def ista_encode(d: Dictionary, x: np.ndarray, lam: float, iters: int) -> np.ndarray:
    """Plain (non-accelerated) proximal gradient, kept as a reference."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    lip = lipschitz_bound(d)
    step = 1.0 / (2.0 * lip)
    a = np.zeros((d.n_atoms, 1), dtype=np.float64)
    for _ in range(iters):
        a = _soft_threshold(a - step * (2.0 * d.atoms.T @ (d.atoms @ a - x)), lam * step)
    return a[:, 0]


def coding_objective(d: Dictionary, x: np.ndarray, a: np.ndarray, lam: float) -> float:
    """||x - D a||^2 + lam*||a||_1 for a single patch/code pair."""
    r = np.asarray(x, dtype=np.float64).ravel() - d.atoms @ np.asarray(a).ravel()
    return float(r @ r + lam * np.abs(a).sum())


def init_dictionary(atom_len: int, n_atoms: int, seed: int) -> Dictionary:
    """Truncated-normal initialization (clipped at two sigma), unit atoms."""
    rng = np.random.default_rng(seed)
    atoms = np.clip(rng.normal(0.0, 1.0, size=(atom_len, n_atoms)), -2.0, 2.0)
    d = Dictionary(atoms=atoms)
    d.normalize()
    return d


def train_dictionary(
    dataset: list[np.ndarray],
    g: PatchGrid,
    k: float = 2.0,
    lam: float = 0.05,
    lr: float = 1e-2,
    batch_size: int = 16,
    fista_iters: int = 50,
    epochs: int = 5,
    seed: int = 0,
) -> tuple[Dictionary, list[float]]:
    """Learn a dictionary from the patches of a tensor dataset.

    Alternates batched FISTA sparse coding with an SGD step on the atoms
    (gradient of the batch reconstruction error with the codes frozen),
    renormalizing atoms after every step.  Returns the dictionary and the
    per-epoch mean of the batch objectives.
    """
    if not dataset:
        raise ValueError("dataset must not be empty")
    all_patches = np.concatenate([patch(as_tensor5(t), g) for t in dataset], axis=0)
    n_atoms = int(round(k * g.atom_len))
    d = init_dictionary(g.atom_len, n_atoms, seed)
    rng = np.random.default_rng(seed + 1)
    epoch_objectives: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(all_patches.shape[0])
        batch_objs = []
        for start in range(0, len(order), batch_size):
            x = all_patches[order[start : start + batch_size]].T  # (atom_len, B)
            a = _fista(d, x, lam, fista_iters)
            resid = x - d.atoms @ a  # (atom_len, B)
            batch_objs.append(
                float(np.sum(resid * resid) + lam * np.abs(a).sum()) / x.shape[1]
            )
            if lr != 0.0:
                # descent on ||x - D a||^2; the gradient's factor 2 is
                # absorbed into the learning rate
                d.atoms += lr * (resid @ a.T)
                d.normalize()
        epoch_objectives.append(float(np.mean(batch_objs)))
    return d, epoch_objectives


def dict_reconstruct(
    l_star_p: np.ndarray,
    m: np.ndarray,
    d: Dictionary,
    g: PatchGrid,
    lam: float,
    iters: int,
) -> np.ndarray:
    """Reconstruct a light field from its projected coded measurement.

    The measurement is lifted to the coded field, patched, sparse coded
    per patch against the masked dictionary (mask folded into the FISTA
    residual), synthesized, and assembled with overlap averaging.
    """
    l_star_p = as_tensor5(l_star_p, "projected measurement")
    lifted = coding.lift(l_star_p, m)
    if lifted.shape != g.source_dims:
        raise ValueError(
            f"lifted measurement {lifted.shape} does not match grid {g.source_dims}"
        )
    mask5 = np.broadcast_to(
        np.asarray(m, dtype=np.float64)[None, None], g.source_dims
    )
    x = patch(lifted, g).T  # (atom_len, n_patches)
    masks = patch(mask5, g).T
    a = _fista(d, x, lam, iters, mask=masks)
    return depatch((d.atoms @ a).T, g)
