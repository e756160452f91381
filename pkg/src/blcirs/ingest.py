"""Problem acquisition: Matrix Market I/O, collection downloads, model-problem
generation, and seeded right-hand-side blocks.

The right-hand-side generator is pinned to a named PRNG (``xs64*-col-v1``):
one xorshift64* substream per column, each substream seeded by the splitmix64
output function applied to ``seed + (column+1) * 0x9E3779B97F4A7C15``.  Raw
64-bit outputs map to the open interval (-1, 1) through
``((x >> 11) + 0.5) * 2**-53 * 2 - 1``.  Identical (n, s, seed) give
bit-identical blocks on every platform.
"""

import io
import os
import tarfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FetchError, MatrixMarketError, UnknownMatrix
from .kernels import CsrMatrix

__all__ = [
    "ProblemSpec",
    "parse_matrix_market",
    "write_matrix_market",
    "load_matrix_market",
    "gen_convection_diffusion",
    "gen_rhs",
    "generated_twin",
    "GENERATED_TWINS",
    "fetch_suitesparse",
    "resolve_matrix",
    "default_cache_dir",
]

_U64 = np.uint64
_GOLDEN = 0x9E3779B97F4A7C15
_XS_MULT = 0x2545F4914F6CDD1D

# Named generated stand-ins for the experiment matrices, usable offline.
# (nx, ny, px, py) for the convection-diffusion generator below.  Convection
# beyond the centered-difference mesh-Peclet limit is deliberate: it produces
# the residual-norm oscillations that drive the plain solver's residual gap.
# Nonsingularity of these two fixed operators is verified in the test suite.
GENERATED_TWINS = {
    "cdde2-twin": (61, 15, 200.0, 80.0),
    "pde2961-twin": (54, 54, 150.0, 150.0),
}

# Collection groups for the matrices used in the experiments.
KNOWN_GROUPS = {
    "cdde2": "Bai",
    "pde2961": "Bai",
    "bfwa782": "Bai",
}

DEFAULT_BASE_URL = "https://sparse.tamu.edu/MM"


@dataclass(frozen=True)
class ProblemSpec:
    """A problem instance: matrix source, block width, and RHS seed.

    ``source`` is a path to a .mtx file, a generated-twin name, a collection
    matrix name (optionally ``Group/name``), or ``generate:nx,ny,px,py``.
    """

    source: str
    s: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("block width s must be at least 1")


def _coo_to_csr(n, rows, cols, vals):
    """Sort by (row, col), sum duplicates, and build a validated CsrMatrix."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        keep = np.ones(rows.size, dtype=bool)
        keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(keep)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
    return CsrMatrix(n, row_ptr, cols, vals)


def parse_matrix_market(source):
    """Parse a coordinate-format Matrix Market stream into a CsrMatrix.

    Accepts a str, bytes, or readable file object.  Real (or integer) square
    matrices only; ``symmetric``/``skew-symmetric`` storage is expanded to
    general form; duplicate entries are summed.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("latin-1")
    lines = source.splitlines()
    if not lines:
        raise MatrixMarketError("empty input")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        raise MatrixMarketError(f"malformed header: {lines[0]!r}")
    obj, fmt, fld, sym = (tok.lower() for tok in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format: {obj} {fmt}")
    if fld not in ("real", "integer"):
        raise MatrixMarketError(f"unsupported field: {fld} (real matrices only)")
    if sym not in ("general", "symmetric", "skew-symmetric"):
        raise MatrixMarketError(f"unsupported symmetry: {sym}")

    body = (ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        size_tokens = next(body).split()
    except StopIteration:
        raise MatrixMarketError("missing size line") from None
    if len(size_tokens) != 3:
        raise MatrixMarketError(f"malformed size line: {' '.join(size_tokens)!r}")
    nrows, ncols, nnz = (int(tok) for tok in size_tokens)
    if nrows != ncols:
        raise MatrixMarketError(f"square matrix required, got {nrows}x{ncols}")
    if nrows < 1 or nnz < 1:
        raise MatrixMarketError("empty matrix")

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    count = 0
    for line in body:
        if count >= nnz:
            raise MatrixMarketError("more entries than declared")
        parts = line.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"malformed entry: {line!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index out of range: {i} {j}")
        rows[count] = i - 1
        cols[count] = j - 1
        vals[count] = float(parts[2])
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}")

    if sym != "general":
        off = rows != cols
        mirror_vals = -vals[off] if sym == "skew-symmetric" else vals[off]
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, mirror_vals]))
    return _coo_to_csr(nrows, rows, cols, vals)


def write_matrix_market(a, sink):
    """Write a CsrMatrix in canonical coordinate/general form.

    Values are formatted with shortest-round-trip decimals, so
    ``parse_matrix_market(write_matrix_market(A))`` reproduces A bit-exactly.
    ``sink`` is a path or a writable text file object.
    """
    if a.nnz == 0:
        raise MatrixMarketError("refusing to write an empty matrix")
    own = isinstance(sink, (str, Path))
    handle = open(sink, "w") if own else sink
    try:
        handle.write("%%MatrixMarket matrix coordinate real general\n")
        handle.write(f"{a.n} {a.n} {a.nnz}\n")
        for i in range(a.n):
            for idx in range(a.row_ptr[i], a.row_ptr[i + 1]):
                handle.write(f"{i + 1} {a.col_idx[idx] + 1} {float(a.values[idx])!r}\n")
    finally:
        if own:
            handle.close()


def load_matrix_market(path):
    with open(path, "r") as handle:
        return parse_matrix_market(handle)


def gen_convection_diffusion(nx, ny, px, py):
    """Five-point convection-diffusion operator on the unit square.

    Centered differences for -lap(u) + px u_x + py u_y with homogeneous
    Dirichlet boundaries on an nx-by-ny interior grid (hx = 1/(nx+1),
    hy = 1/(ny+1)); n = nx*ny unknowns, at most five nonzeros per row,
    nonsymmetric whenever px or py is nonzero.

    Below the mesh-Peclet limits |px| < 2(nx+1) and |py| < 2(ny+1) every
    off-diagonal is nonpositive and the matrix is irreducibly diagonally
    dominant (weak in the interior, strict next to the boundary), hence
    nonsingular.
    """
    if nx < 2 or ny < 2:
        raise ValueError("grid must be at least 2x2")
    hx, hy = 1.0 / (nx + 1), 1.0 / (ny + 1)
    center = 2.0 / hx**2 + 2.0 / hy**2
    west = -1.0 / hx**2 - px / (2.0 * hx)
    east = -1.0 / hx**2 + px / (2.0 * hx)
    south = -1.0 / hy**2 - py / (2.0 * hy)
    north = -1.0 / hy**2 + py / (2.0 * hy)

    n = nx * ny
    idx = np.arange(n, dtype=np.int64)
    i, j = idx % nx, idx // nx
    rows, cols, vals = [], [], []
    for offset, mask, value in (
        (-nx, j > 0, south),
        (-1, i > 0, west),
        (0, np.ones(n, dtype=bool), center),
        (1, i < nx - 1, east),
        (nx, j < ny - 1, north),
    ):
        sel = idx[mask]
        rows.append(sel)
        cols.append(sel + offset)
        vals.append(np.full(sel.size, value))
    return _coo_to_csr(n, np.concatenate(rows), np.concatenate(cols),
                       np.concatenate(vals))


def generated_twin(name):
    """Bundled generated stand-in problems for offline runs."""
    try:
        nx, ny, px, py = GENERATED_TWINS[name]
    except KeyError:
        raise UnknownMatrix(f"unknown generated twin: {name!r}") from None
    return gen_convection_diffusion(nx, ny, px, py)


def _splitmix_mix(z):
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def gen_rhs(n, s, seed=0):
    """Seeded random block with entries i.i.d. uniform on (-1, 1).

    Uses the pinned ``xs64*-col-v1`` generator (see module docstring):
    column j is an independent xorshift64* stream, so the block is
    reproducible bit-for-bit across platforms and processes.
    """
    if n < 1 or s < 1:
        raise ValueError("n and s must be at least 1")
    with np.errstate(over="ignore"):
        base = _U64(seed & ((1 << 64) - 1)) + \
            np.arange(1, s + 1, dtype=np.uint64) * _U64(_GOLDEN)
        state = _splitmix_mix(base)
        state[state == 0] = _U64(_GOLDEN)
        out = np.empty((n, s), dtype=np.float64, order="F")
        for i in range(n):
            state ^= state >> _U64(12)
            state ^= state << _U64(25)
            state ^= state >> _U64(27)
            word = state * _U64(_XS_MULT)
            out[i, :] = ((word >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-52 - 1.0
    return out


def default_cache_dir():
    env = os.environ.get("BLCIRS_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "blcirs"


def fetch_suitesparse(name, cache_dir=None, base_url=DEFAULT_BASE_URL,
                      checksum=None, timeout=60.0):
    """Fetch a collection matrix archive and cache the extracted .mtx file.

    ``name`` is a bare matrix name from the known-group registry or a
    ``Group/name`` pair.  Returns the cached file path; a cache hit makes no
    network request.  Raises :class:`UnknownMatrix` for unregistered bare
    names, and :class:`FetchError` for network/archive/checksum failures
    (distinct from parse errors).
    """
    if "/" in name:
        group, base = name.split("/", 1)
    else:
        base = name
        group = KNOWN_GROUPS.get(name)
        if group is None:
            raise UnknownMatrix(
                f"unknown matrix {name!r}; pass 'Group/name' for matrices "
                f"outside the registry {sorted(KNOWN_GROUPS)}")
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    target = cache / f"{base}.mtx"
    if target.exists():
        return target

    import filelock
    import requests

    cache.mkdir(parents=True, exist_ok=True)
    with filelock.FileLock(str(target) + ".lock"):
        if target.exists():
            return target
        url = f"{base_url}/{group}/{base}.tar.gz"
        try:
            resp = requests.get(url, timeout=timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise FetchError(f"download failed for {url}: {exc}") from exc
        payload = resp.content
        if checksum is not None:
            import hashlib
            digest = hashlib.sha256(payload).hexdigest()
            if digest != checksum:
                raise FetchError(f"checksum mismatch for {name}: {digest}")
        try:
            with tarfile.open(fileobj=io.BytesIO(payload), mode="r:gz") as tar:
                member = next((m for m in tar.getmembers()
                               if m.name.endswith(f"{base}.mtx")), None)
                if member is None:
                    raise FetchError(f"archive for {name} has no {base}.mtx")
                data = tar.extractfile(member).read()
        except tarfile.TarError as exc:
            raise FetchError(f"bad archive for {name}: {exc}") from exc
        tmp = target.with_suffix(".tmp")
        tmp.write_bytes(data)
        tmp.replace(target)
    return target


def resolve_matrix(source, cache_dir=None):
    """Resolve a matrix source string to (CsrMatrix, label).

    Resolution order: generated-twin name, ``generate:nx,ny,px,py`` spec,
    existing file path, collection matrix name.
    """
    if source in GENERATED_TWINS:
        return generated_twin(source), source
    if source.startswith("generate:"):
        parts = source[len("generate:"):].split(",")
        if len(parts) != 4:
            raise ValueError("generate spec must be generate:nx,ny,px,py")
        nx, ny = int(parts[0]), int(parts[1])
        px, py = float(parts[2]), float(parts[3])
        return gen_convection_diffusion(nx, ny, px, py), f"gen{nx}x{ny}"
    path = Path(source)
    if path.exists():
        return load_matrix_market(path), path.stem
    fetched = fetch_suitesparse(source, cache_dir=cache_dir)
    label = source.split("/")[-1]
    return load_matrix_market(fetched), label
