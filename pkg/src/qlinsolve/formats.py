"""Text formats: phase files, matrix-spec files and CSV output.

Every float is written with 17 significant digits so values round-trip
exactly.
"""
import csv
import os
import tempfile

import numpy as np

from qlinsolve.errors import InvalidInputError
from qlinsolve.invpoly import REFLECTION, PhaseSequence


def fmt(x):
    return f"{float(x):.17g}"


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- phase files ----------------------------------------------------------------


def format_phase_sequence(seq):
    lines = [
        f"convention {seq.convention}",
        f"degree {seq.degree}",
        f"kappa {fmt(seq.kappa)}",
        f"epsilon {fmt(seq.epsilon)}",
        f"beta {fmt(seq.beta)}",
        f"residual {fmt(seq.residual)}",
        "phases",
    ]
    lines += [fmt(p) for p in seq.phases]
    return "\n".join(lines) + "\n"


def parse_phase_sequence(text):
    header = {}
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        split = lines.index("phases")
    except ValueError as exc:
        raise InvalidInputError("phase file lacks a 'phases' line") from exc
    for ln in lines[:split]:
        key, _, val = ln.partition(" ")
        header[key] = val.strip()
    for key in ("convention", "degree", "kappa", "epsilon", "beta"):
        if key not in header:
            raise InvalidInputError(f"phase file header lacks {key!r}")
    phases = np.array([float(v) for v in lines[split + 1:]])
    d = int(header["degree"])
    if phases.size != d + 1:
        raise InvalidInputError(f"phase file declares degree {d} but lists {phases.size} phases")
    conv = header["convention"]
    correction = d * np.pi / 2 if conv == REFLECTION else 0.0
    return PhaseSequence(
        conv, phases, float(header["beta"]), float(header["kappa"]), float(header["epsilon"]),
        correction, float(header.get("residual", "0")),
    )


def write_phase_file(path, seq):
    atomic_write_text(path, format_phase_sequence(seq))


def read_phase_file(path):
    with open(path) as fh:
        return parse_phase_sequence(fh.read())


# -- matrix-spec files ------------------------------------------------------------


def read_matrix_spec(path):
    """Matrix from ``dimension N`` plus ``row col re im`` lines (``#`` comments allowed)."""
    dim = None
    entries = []
    with open(path) as fh:
        for raw in fh:
            ln = raw.split("#", 1)[0].strip()
            if not ln:
                continue
            parts = ln.split()
            if parts[0] == "dimension":
                dim = int(parts[1])
                continue
            if len(parts) != 4:
                raise InvalidInputError(f"bad matrix-spec line: {raw.rstrip()!r}")
            entries.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
    if dim is None or dim < 1:
        raise InvalidInputError("matrix-spec file needs a positive 'dimension'")
    A = np.zeros((dim, dim), dtype=np.complex128)
    for r, c, re, im in entries:
        if not (0 <= r < dim and 0 <= c < dim):
            raise InvalidInputError(f"entry ({r}, {c}) outside dimension {dim}")
        A[r, c] = complex(re, im)
    return A


def write_matrix_spec(path, A):
    A = np.asarray(A, dtype=np.complex128)
    lines = [f"dimension {A.shape[0]}"]
    for r, c in zip(*np.nonzero(A)):
        lines.append(f"{r} {c} {fmt(A[r, c].real)} {fmt(A[r, c].imag)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- CSV ------------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_csv(path, header, rows, comments=()):
    """CSV with optional ``#`` comment lines; floats at 17 significant digits."""
    lines = [f"# {c}" for c in comments]
    buf = _Buffer()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else "") + buf.text())


def read_csv(path):
    """``(header, rows)`` skipping ``#`` lines; values stay strings."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


class _Buffer:
    def __init__(self):
        self.parts = []

    def write(self, s):
        self.parts.append(s)

    def text(self):
        return "".join(self.parts)


TRAJECTORY_HEADER = ("time", "grid_index", "value_re", "value_im")
SOLVE_HEADER = (
    "matrix_id", "dim", "alpha", "sigma_min", "kappa", "degree",
    "success_probability", "residual", "wall_time_ms",
)
SCALING_HEADER = ("variable", "value", "sigma_min", "degree", "alpha", "success_probability", "kappa", "status")


def trajectory_rows(times, states, grid_offset=0):
    rows = []
    for t, u in zip(times, states):
        for i, v in enumerate(np.asarray(u, dtype=np.complex128)):
            rows.append((float(t), i + grid_offset, float(v.real), float(v.imag)))
    return rows


def solve_row(matrix_id, report, dim, wall_ms):
    return (
        matrix_id, dim, report.alpha, report.sigma_min, report.kappa_used, report.degree_used,
        report.success_probability, report.residual, float(wall_ms),
    )
