"""Independent reference computations used by the tests.

Nothing here imports the package under test: each oracle recomputes its
answer from first principles with plain numpy.
"""

import itertools
import json
import pathlib

import numpy as np

OCTIC = "(x^3 - x*y^2 + y + 1)^2 * (x^2 + y^2 - 1) + y^2 - 5"
QUADRIC = "x*y + y^2 - 2*z*w; x^2 + y^2 + z^2 + w^2 - 1"
QUADRIC_VARS = ["x", "y", "z", "w"]


def central_difference(f, x, h=1e-5):
    """Jacobian of a vector function by central differences (complex-safe)."""
    x = np.asarray(x, dtype=complex)
    f0 = np.atleast_1d(f(x))
    J = np.zeros((len(f0), len(x)), dtype=complex)
    for j in range(len(x)):
        e = np.zeros(len(x), dtype=complex)
        e[j] = h
        J[:, j] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h)
    return J


def gf2_rank_dense(M: np.ndarray) -> int:
    """Rank over GF(2) of a dense 0/1 matrix by row reduction."""
    A = (np.asarray(M, dtype=np.uint8) & 1).copy()
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        piv = np.nonzero(A[r:, c])[0]
        if len(piv) == 0:
            continue
        p = r + piv[0]
        A[[r, p]] = A[[p, r]]
        others = np.nonzero(A[:, c])[0]
        others = others[others != r]
        A[others] ^= A[r]
        r += 1
        if r == rows:
            break
    return r


def betti_bruteforce(simplices_by_dim, top_dim):
    """Betti numbers over GF(2) from dense boundary matrices."""
    def count(k):
        return len(simplices_by_dim[k]) if k < len(simplices_by_dim) else 0

    ranks = [0] * (top_dim + 3)
    for k in range(1, top_dim + 2):
        if count(k) == 0 or count(k - 1) == 0:
            continue
        index = {s: i for i, s in enumerate(simplices_by_dim[k - 1])}
        M = np.zeros((count(k - 1), count(k)), dtype=np.uint8)
        for j, s in enumerate(simplices_by_dim[k]):
            for face in itertools.combinations(s, k):
                M[index[face], j] = 1
        ranks[k] = gf2_rank_dense(M)
    return [count(k) - ranks[k] - ranks[k + 1] for k in range(top_dim + 1)]


def random_closed_complex(rng, num_vertices, max_simplices=200, max_dim=3):
    """Downward closure of random simplices, trimmed to at most ``max_simplices`` faces."""
    faces = set((v,) for v in range(num_vertices))
    while True:
        k = int(rng.integers(1, max_dim + 1))
        s = tuple(sorted(rng.choice(num_vertices, size=min(k + 1, num_vertices), replace=False).tolist()))
        new = {f for r in range(1, len(s) + 1) for f in itertools.combinations(s, r)}
        if len(faces | new) > max_simplices:
            break
        faces |= new
        if rng.uniform() < 0.05:
            break
    by_dim = [[] for _ in range(max_dim + 1)]
    for f in faces:
        by_dim[len(f) - 1].append(f)
    return [sorted(x) for x in by_dim]


def octic_slice_y(g):
    """Real y with (g, y) on the degree-8 test curve, by expanding in numpy and rooting."""
    P = np.polynomial.Polynomial
    y = P([0, 1])
    p = (g ** 3 - g * y ** 2 + y + 1) ** 2 * (g ** 2 + y ** 2 - 1) + y ** 2 - 5
    r = p.roots()
    return np.sort(r[np.abs(r.imag) < 1e-9].real)


def octic_slice_x(g):
    P = np.polynomial.Polynomial
    x = P([0, 1])
    p = (x ** 3 - x * g ** 2 + g + 1) ** 2 * (x ** 2 + g ** 2 - 1) + g ** 2 - 5
    r = p.roots()
    return np.sort(r[np.abs(r.imag) < 1e-9].real)


def octic_basic_count(delta, tx, ty, lo, hi):
    """|E_delta| for the degree-8 test curve by rooting every grid slice."""
    total = 0
    for axis, tr, fn in ((0, tx, octic_slice_y), (1, ty, octic_slice_x)):
        m0 = int(np.ceil((lo[axis] - tr) / delta))
        m1 = int(np.floor((hi[axis] - tr) / delta))
        for m in range(m0, m1 + 1):
            total += len(fn(tr + m * delta))
    return total


def circle_line_points(delta, translation, lo, hi):
    """Closed-form points of the unit circle on the translated grid lines."""
    pts = []
    for axis in (0, 1):
        tr = translation[axis]
        m0 = int(np.ceil((lo[axis] - tr) / delta))
        m1 = int(np.floor((hi[axis] - tr) / delta))
        for m in range(m0, m1 + 1):
            g = tr + m * delta
            if abs(g) < 1:
                h = np.sqrt(1 - g * g)
                for s in (h, -h):
                    pts.append((g, s) if axis == 0 else (s, g))
    return np.array(pts)


def quadric_points(rng, size):
    """Random points of {xy + y^2 = 2zw} on the unit 3-sphere."""
    x, y, z = rng.normal(size=(3, size))
    w = (x * y + y * y) / (2 * z)
    P = np.stack([x, y, z, w], axis=1)
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def quadric_eta(P):
    """eta = 1 / (7 D^{3/2} ||f|| ||Df^+ sqrt(2)||) for the single form xy + y^2 - 2zw."""
    x, y, z, w = P.T
    grad = np.stack([y, x + 2 * y, -2 * w, -2 * z], axis=1)
    weil = np.sqrt(1 / 2 + 1 + 4 / 2)
    mu = weil * np.sqrt(2) / np.linalg.norm(grad, axis=1)
    return 1 / (7 * 2 ** 1.5 * mu)


def load_schemas():
    """jsonschema validators for every shipped schema, resolving shared definitions."""
    from jsonschema import Draft202012Validator
    from referencing import Registry, Resource

    root = pathlib.Path(__file__).resolve().parents[1] / "src" / "varietysample" / "schemas"
    docs = {p.name: json.loads(p.read_text()) for p in root.glob("*.json")}
    registry = Registry().with_resources((k, Resource.from_contents(v)) for k, v in docs.items())
    return {k.removesuffix(".schema.json"): Draft202012Validator(v, registry=registry)
            for k, v in docs.items() if k.endswith(".schema.json")}
