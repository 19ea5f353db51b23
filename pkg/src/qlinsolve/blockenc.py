"""Block encodings of sparse banded matrices.

A matrix is split into data items: constant values placed along a
(cyclically) shifted diagonal with some rows deleted, or isolated
entries. The encoding circuit is

    UNPREP^dag . [shift] . [delete / insert] . PREP

acting on ``m`` data qubits, one delete qubit and ``n`` matrix qubits.
PREP loads ``sqrt(|a_i| / alpha) e^{i arg a_i}`` into the data register,
UNPREP the same magnitudes without phases, so the all-ancilla-zero block
of the unitary is ``sum_i a_i M_i / alpha``.

Shift convention: a left shift by ``k`` (``shift = +k``) sends matrix
column ``c`` to row ``c + k mod N``, i.e. it fills the ``k``-th
subdiagonal; right shifts (``shift < 0``) fill superdiagonals.
"""
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from qlinsolve.errors import InvalidInputError, ResourceLimitError
from qlinsolve.numerics import as_matrix, singular_extrema, svd
from qlinsolve.statevector import (
    MAX_UNITARY_QUBITS,
    MCX,
    Circuit,
    RegisterLayout,
    RegisterPermutation,
    RegisterUnitary,
    circuit_columns,
    householder_completion,
)


@dataclass(frozen=True)
class DataItem:
    value: complex
    shift: int = 0
    delete_rows: frozenset = frozenset()
    insert_positions: frozenset = frozenset()

    @property
    def is_insert(self):
        return bool(self.insert_positions)

    def rows(self, dim):
        """Rows where this item contributes an entry."""
        if self.insert_positions:
            return sorted(r for r, _ in self.insert_positions)
        return [r for r in range(dim) if r not in self.delete_rows]

    def pattern(self, dim):
        """0/1 matrix of the positions this item writes."""
        M = np.zeros((dim, dim))
        for r in self.rows(dim):
            M[r, (r - self.shift) % dim] = 1.0
        return M


@dataclass
class BandedSpec:
    dimension: int
    items: list
    modified_diagonal: tuple = None

    @property
    def n_data_qubits(self):
        return max(1, int(np.ceil(np.log2(max(len(self.items), 1)))))

    @property
    def alpha(self):
        return float(sum(abs(it.value) for it in self.items))

    @property
    def values(self):
        return [it.value for it in self.items]

    def reconstruct(self):
        A = np.zeros((self.dimension, self.dimension), dtype=np.complex128)
        for it in self.items:
            if it.value != 0:
                A += it.value * it.pattern(self.dimension)
        return A


@dataclass
class BlockEncoding:
    """Unitary circuit whose ancilla-zero block is ``A / alpha``.

    ``row_projector``/``col_projector`` name the qubits fixed to ``|0>``
    (the whole flag register for square matrices).
    """

    circuit: Circuit
    alpha: float
    layout: RegisterLayout
    row_projector: tuple
    col_projector: tuple
    spec: BandedSpec = None
    stats: dict = field(default_factory=dict)

    @property
    def block_dim(self):
        return 1 << self.layout.n_matrix


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


# -- decomposition -----------------------------------------------------------


def _diagonal_entries(A, shift):
    N = A.shape[0]
    out = {}
    for r in range(N):
        c = r - shift
        if 0 <= c < N and A[r, c] != 0:
            out[r] = A[r, c]
    return out


def banded_spec_from_matrix(A, modify_diagonal=None):
    """Split ``A`` into data items.

    Values repeated along a diagonal become one item with deletions;
    values that occur once on their diagonal become insert items. If the
    main diagonal carries exactly two repeated values ``u`` (first by
    row) and ``v``, they may be replaced by ``v - u`` (deleted where the
    value is ``u``) plus ``u`` on the union of rows, which lowers
    ``alpha`` whenever ``|v - u| < |v|``. ``modify_diagonal=None``
    applies the split only when it lowers ``alpha``.
    """
    A = as_matrix(A)
    N, M = A.shape
    if N != M:
        raise InvalidInputError(f"matrix must be square, got {A.shape}")
    if not _is_pow2(N):
        raise InvalidInputError(f"dimension {N} is not a power of two; zero-pad first")

    diagonal_items, inserts = [], []
    modified = None
    all_rows = set(range(N))
    for shift in range(N - 1, -N, -1):
        entries = _diagonal_entries(A, shift)
        if not entries:
            continue
        groups = {}
        for r, v in entries.items():
            groups.setdefault(complex(v), []).append(r)
        repeated = [(rows[0], v, rows) for v, rows in groups.items() if len(rows) >= 2]
        repeated.sort(key=lambda t: t[0])
        for v, rows in groups.items():
            if len(rows) == 1:
                r = rows[0]
                inserts.append(DataItem(v, shift, frozenset(), frozenset({(r, r - shift)})))

        split = None
        if shift == 0 and len(repeated) == 2 and modify_diagonal is not False:
            (_, u, ru), (_, v, rv) = repeated
            plain = abs(u) + abs(v)
            options = [(abs(v - u) + abs(u), u, ru, v, rv), (abs(u - v) + abs(v), v, rv, u, ru)]
            cost, base, rbase, other, rother = min(options, key=lambda t: t[0])
            if modify_diagonal or cost < plain:
                split = (other - base, base)
                union = set(rbase) | set(rother)
                diagonal_items.append(DataItem(other - base, 0, frozenset(all_rows - set(rother))))
                diagonal_items.append(DataItem(base, 0, frozenset(all_rows - union)))
                modified = split
        if split is None:
            for _, v, rows in repeated:
                diagonal_items.append(DataItem(v, shift, frozenset(all_rows - set(rows))))

    inserts.sort(key=lambda it: next(iter(it.insert_positions)))
    items = diagonal_items + inserts
    if not items:
        raise InvalidInputError("cannot block-encode the zero matrix")
    target = 1 << max(1, int(np.ceil(np.log2(len(items)))))
    items += [DataItem(0j)] * (target - len(items))
    spec = BandedSpec(N, items, modified)
    if not np.array_equal(spec.reconstruct(), A):  # pragma: no cover - construction invariant
        raise AssertionError("banded decomposition does not reproduce the matrix")
    return spec


# -- coherent permutations -----------------------------------------------------


def _bits(x, n):
    return [(x >> (n - 1 - q)) & 1 for q in range(n)]


def _ordered_paths(src, dst, n, direction):
    diff = [q for q in range(n) if ((src ^ dst) >> (n - 1 - q)) & 1]
    # right-ended chains finish next to the least significant qubit, left-ended next to the most
    canonical = diff if direction == "right" else diff[::-1]
    yield canonical
    for order in permutations(diff):
        if list(order) != canonical:
            yield list(order)


def _transposition(state, flip_qubit, n, qubits):
    controls = [qubits[q] for q in range(n) if q != flip_qubit]
    pols = [b for q, b in enumerate(_bits(state, n)) if q != flip_qubit]
    return MCX(tuple(controls), qubits[flip_qubit], tuple(pols), label="perm")


def build_permutation(indices, direction, register_size, qubits=None):
    """MCX chain gathering ``indices`` into an aligned block.

    ``direction='right'`` (P_R) moves the set onto states whose trailing
    bits are all zero; ``'left'`` (P_L) onto states whose leading bits are
    all one. Members already in the block stay put; every other member is
    routed to the nearest free block state through a chain of fully
    controlled bit flips, each a transposition of two basis states. When
    every path crosses another member, the member is swapped with its
    target by walking the path and back, which leaves the intermediate
    states in place.
    """
    indices = [int(i) for i in indices]
    if len(set(indices)) != len(indices):
        raise InvalidInputError("duplicate indices")
    n = int(register_size)
    if direction not in ("left", "right"):
        raise InvalidInputError("direction must be 'left' or 'right'")
    if any(not 0 <= i < (1 << n) for i in indices):
        raise InvalidInputError("index outside register")
    qubits = tuple(range(n)) if qubits is None else tuple(qubits)
    if not indices:
        return []
    j = int(np.ceil(np.log2(len(indices))))
    free_bits = n - j
    if direction == "right":
        block = {t for t in range(1 << n) if t % (1 << free_bits) == 0}
        tie = lambda x, t: x ^ t  # noqa: E731
    else:
        block = set(range((1 << n) - (1 << j), 1 << n))
        tie = lambda x, t: int(format(x ^ t, f"0{n}b")[::-1], 2)  # noqa: E731

    occupied = set(indices)
    free = sorted(block - occupied)
    gates = []
    for x in sorted(i for i in indices if i not in block):
        free.sort(key=lambda t: (bin(x ^ t).count("1"), tie(x, t)))
        placed = False
        for t in free:
            for order in _ordered_paths(x, t, n, direction):
                cur, steps, ok = x, [], True
                for q in order:
                    nxt = cur ^ (1 << (n - 1 - q))
                    if nxt != t and nxt in occupied:
                        ok = False
                        break
                    steps.append((cur, q))
                    cur = nxt
                if ok:
                    gates.extend(_transposition(s, q, n, qubits) for s, q in steps)
                    occupied.discard(x)
                    occupied.add(t)
                    free.remove(t)
                    placed = True
                    break
            if placed:
                break
        if not placed:
            # every path crosses an occupied state: swap x and t along a path and
            # walk back, which restores the intermediates (2k - 1 transpositions)
            t = free[0]
            cur, steps = x, []
            for q in next(_ordered_paths(x, t, n, direction)):
                steps.append((cur, q))
                cur ^= 1 << (n - 1 - q)
            chain = steps + steps[-2::-1]
            gates.extend(_transposition(st, q, n, qubits) for st, q in chain)
            occupied.discard(x)
            occupied.add(t)
            free.remove(t)
    return gates


def permutation_mapping(gates, register_size):
    """Bijection realized by an MCX chain on a bare register of ``register_size`` qubits."""
    n = register_size
    mapping = list(range(1 << n))
    pos = {i: i for i in range(1 << n)}
    for g in gates:
        mask = val = 0
        for q, p in zip(g.controls, g.polarities):
            bit = 1 << (n - 1 - q)
            mask |= bit
            val |= bit if p else 0
        tbit = 1 << (n - 1 - g.target)
        for src, cur in list(pos.items()):
            if (cur & mask) == val:
                pos[src] = cur ^ tbit
    for src, cur in pos.items():
        mapping[src] = cur
    return mapping


# -- circuit construction --------------------------------------------------------


def _aligned_cover(rows, n):
    """Minimal-ish cover of ``rows`` by aligned power-of-two blocks: (start, size) pairs."""
    rows = set(rows)
    out = []
    for r in sorted(rows):
        if any(s <= r < s + z for s, z in out):
            continue
        size = 1
        while True:
            nxt = size * 2
            if r % nxt or nxt > (1 << n) or not all(x in rows for x in range(r, r + nxt)):
                break
            size = nxt
        out.append((r, size))
    return out


def _pattern_controls(qubits, value):
    k = len(qubits)
    return tuple(qubits), tuple((value >> (k - 1 - i)) & 1 for i in range(k))


def _shift_perm(k, n):
    N = 1 << n
    return tuple((v + k) % N for v in range(N))


def _shift_gates(items, layout, group):
    data = layout.register("data")
    mat = layout.register("matrix")
    n, m = len(mat), len(data)
    live = [i for i, it in enumerate(items) if it.value != 0 and it.shift % (1 << n)]
    zeros = [i for i, it in enumerate(items) if it.value == 0]
    components = {}
    for i in live:
        s = items[i].shift
        sign = 1 if s > 0 else -1
        mag = abs(s)
        p = 0
        while mag:
            if mag & 1:
                components.setdefault((sign, p), []).append(i)
            mag >>= 1
            p += 1

    gates, grouped_ops = [], 0
    for (sign, p), members in sorted(components.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
        perm = _shift_perm(sign * (1 << p), n)
        per_item = []
        for i in members:
            cq, cp = _pattern_controls(data, i)
            per_item.append(RegisterPermutation(mat, perm, cq, cp, label=f"{'L' if sign > 0 else 'R'}{1 << p}"))
        best = per_item
        if group and len(members) > 1:
            pool = list(members)
            size = 1 << int(np.ceil(np.log2(len(pool))))
            pool += zeros[: size - len(pool)]
            if _is_pow2(len(pool)) and len(pool) <= (1 << m):
                chain = build_permutation(pool, "right", m, data)
                j = int(np.log2(len(pool)))
                tail = data[j:]
                ctrl = RegisterPermutation(mat, perm, tail, (0,) * len(tail), label=f"{'L' if sign > 0 else 'R'}{1 << p}")
                inv = [g.inverse() for g in reversed(chain)]
                candidate = chain + [ctrl] + inv
                if group == "always" or len(candidate) < len(per_item):
                    best = candidate
                    grouped_ops += 1
        gates.extend(best)
    return gates, grouped_ops


def _delete_gates(items, layout, group):
    data = layout.register("data")
    mat = layout.register("matrix")
    (dq,) = layout.register("delete")
    n = len(mat)
    gates, grouped = [], 0
    for i, it in enumerate(items):
        if it.value == 0:
            continue
        cq, cp = _pattern_controls(data, i)
        if it.is_insert:
            (r, _), = it.insert_positions
            rq, rp = _pattern_controls(mat, r)
            gates.append(MCX(cq, dq, cp, label="I"))
            gates.append(MCX(cq + rq, dq, cp + rp, label="I"))
            continue
        rows = sorted(it.delete_rows)
        if not rows:
            continue
        cover = []
        for start, size in _aligned_cover(rows, n):
            k = n - int(np.log2(size))
            lead, lp = _pattern_controls(mat[:k], start >> (n - k))
            cover.append(MCX(cq + lead, dq, cp + lp, label="D"))
        best = cover
        if group and len(rows) > 1 and _is_pow2(len(rows)):
            chain = build_permutation(rows, "left", n, mat)
            k = n - int(np.log2(len(rows)))
            lead = mat[:k]
            mid = MCX(cq + lead, dq, cp + (1,) * k, label="D")
            candidate = chain + [mid] + [g.inverse() for g in reversed(chain)]
            if group == "always" or len(candidate) < len(cover):
                best = candidate
                grouped += 1
        gates.extend(best)
    return gates, grouped


def build_block_encoding(spec, group=True):
    """Circuit for ``spec``; ``alpha`` is the sum of item moduli.

    ``group=True`` routes shared shift components and power-of-two delete
    sets through P_R / P_L permutations when that lowers the gate count,
    ``"always"`` whenever the set size allows it, ``False`` never.
    """
    n = int(np.log2(spec.dimension))
    m = spec.n_data_qubits
    if len(spec.items) > (1 << m):
        raise ResourceLimitError(f"{len(spec.items)} items exceed {m} data qubits")
    layout = RegisterLayout(0, m + 1, n)
    alpha = spec.alpha
    if alpha == 0:
        raise InvalidInputError("cannot block-encode the zero matrix")
    vals = np.zeros(1 << m, dtype=np.complex128)
    vals[: len(spec.items)] = spec.values
    mags = np.sqrt(np.abs(vals) / alpha)
    prep = householder_completion(mags * np.exp(1j * np.angle(vals)))
    unprep = householder_completion(mags.astype(np.complex128))
    data = layout.register("data")

    circ = Circuit(layout)
    circ.append(RegisterUnitary(data, prep, label="PREP"))
    shifts, grouped_shifts = _shift_gates(spec.items, layout, group)
    deletes, grouped_deletes = _delete_gates(spec.items, layout, group)
    circ.extend(shifts)
    circ.extend(deletes)
    circ.append(RegisterUnitary(data, unprep.conj().T, label="UNPREP"))
    flag = layout.register("flag")
    stats = {
        "mcx": circ.count(MCX),
        "shift_ops": circ.count(RegisterPermutation),
        "grouped_shifts": grouped_shifts,
        "grouped_deletes": grouped_deletes,
    }
    return BlockEncoding(circ, alpha, layout, flag, flag, spec, stats)


def _psd_sqrt_complement(W, s):
    return (W * np.sqrt(np.clip(1.0 - s**2, 0.0, None))) @ W.conj().T


def build_dilation_encoding(A, alpha):
    """Reference encoding ``[[A/a, sqrt(I - AA^+/a^2)], [sqrt(I - A^+A/a^2), -A^+/a]]``."""
    A = as_matrix(A)
    N = A.shape[0]
    if A.shape != (N, N) or not _is_pow2(N):
        raise InvalidInputError("dilation encoding needs a square power-of-two matrix")
    smax, _ = singular_extrema(A)
    if alpha <= 0 or smax > alpha * (1 + 1e-12):
        raise InvalidInputError(f"alpha={alpha} is below the spectral norm {smax}")
    Ab = A / alpha
    r = svd(Ab)
    s = np.clip(r.singular_values, 0.0, 1.0)
    U = np.block(
        [
            [Ab, _psd_sqrt_complement(r.left_vectors, s)],
            [_psd_sqrt_complement(r.right_vectors, s), -Ab.conj().T],
        ]
    )
    n = int(np.log2(N))
    layout = RegisterLayout(0, 1, n)
    circ = Circuit(layout).append(RegisterUnitary(tuple(range(n + 1)), U, label="dilation"))
    return BlockEncoding(circ, float(alpha), layout, (0,), (0,))


def extract_block(enc):
    """``Pi~ U Pi``: rows and columns with every projected ancilla in ``|0>``."""
    total = enc.layout.total
    if total > MAX_UNITARY_QUBITS:
        raise ResourceLimitError(f"{total} qubits exceeds the extraction cap of {MAX_UNITARY_QUBITS}")
    idx = np.arange(enc.layout.dim)
    cols = _projector_indices(enc.col_projector, total, idx)
    rows = _projector_indices(enc.row_projector, total, idx)
    U_cols = circuit_columns(enc.circuit, cols)
    return U_cols[rows, :]


def _projector_indices(qubits, total, idx):
    mask = 0
    for q in qubits:
        mask |= 1 << (total - 1 - q)
    return idx[(idx & mask) == 0]


def pad_to_power_of_two(A):
    """Zero-pad ``A`` to the next power-of-two size (off-diagonal and trailing blocks zero)."""
    A = as_matrix(A)
    N = A.shape[0]
    P = 1 << int(np.ceil(np.log2(max(N, 2))))
    out = np.zeros((P, P), dtype=np.complex128)
    out[:N, : A.shape[1]] = A
    return out
