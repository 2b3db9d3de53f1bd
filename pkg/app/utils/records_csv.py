"""
DiagnosticsRecord CSV 입출력 (17자리 유효숫자, 고정 컬럼 순서)
"""
import csv
import io
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from app.models.records import CLAMP_C, CLAMP_N, DiagnosticsRecord

FIXED_COLUMNS = [
    "t", "mass_n", "min_n", "max_n", "sup_c", "int_c", "grad_c_sq", "kinetic",
    "enstrophy_like", "F", "G", "y_p", "z_p", "clamp_flags",
]
_OPTIONAL = {"G", "y_p", "z_p"}


def record_header(lp_exponents: Sequence[float]) -> List[str]:
    return (
        list(FIXED_COLUMNS)
        + [f"n_L{p:g}" for p in lp_exponents]
        + [f"u_L{p:g}" for p in lp_exponents]
    )


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".17g")


def _row(rec: DiagnosticsRecord) -> List[str]:
    row = [_fmt(getattr(rec, name)) for name in FIXED_COLUMNS[:-1]]
    row.append(str(rec.clamp_flags))
    row.extend(_fmt(v) for v in rec.lp_norms_n)
    row.extend(_fmt(v) for v in rec.lp_norms_u)
    return row


def records_to_text(records: Sequence[DiagnosticsRecord], lp_exponents: Optional[Sequence[float]] = None) -> str:
    if lp_exponents is None:
        lp_exponents = records[0].lp_exponents if records else ()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(record_header(lp_exponents))
    for rec in records:
        writer.writerow(_row(rec))
    return buffer.getvalue()


def write_records(
    records: Sequence[DiagnosticsRecord],
    path: Union[str, Path],
    lp_exponents: Optional[Sequence[float]] = None,
) -> None:
    Path(path).write_text(records_to_text(records, lp_exponents), encoding="utf-8")


def _exponents_from_header(header: List[str]) -> Tuple[float, ...]:
    if header[: len(FIXED_COLUMNS)] != FIXED_COLUMNS:
        raise ValueError("records header does not start with the fixed diagnostics columns")
    extra = header[len(FIXED_COLUMNS):]
    if len(extra) % 2:
        raise ValueError("records header has an odd number of norm columns")
    half = len(extra) // 2
    n_cols, u_cols = extra[:half], extra[half:]
    if not all(c.startswith("n_L") for c in n_cols) or not all(c.startswith("u_L") for c in u_cols):
        raise ValueError("norm columns must be n_L<p> followed by u_L<p>")
    exponents = tuple(float(c[3:]) for c in n_cols)
    if exponents != tuple(float(c[3:]) for c in u_cols):
        raise ValueError("n and u norm columns use different exponents")
    return exponents


def parse_records(text: str) -> List[DiagnosticsRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("records file is empty")
    exponents = _exponents_from_header(header)
    width = len(header)
    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise ValueError(f"line {line_no}: expected {width} columns, got {len(row)}")
        values = dict(zip(header, row))
        fields = {}
        for name in FIXED_COLUMNS[:-1]:
            raw = values[name]
            if raw == "":
                if name not in _OPTIONAL:
                    raise ValueError(f"line {line_no}: column {name} is empty")
                fields[name] = None
            else:
                fields[name] = float(raw)
        flags = int(values["clamp_flags"])
        half = len(exponents)
        norms = [float(v) for v in row[len(FIXED_COLUMNS):]]
        records.append(DiagnosticsRecord(
            **fields,
            clamp_n=bool(flags & CLAMP_N),
            clamp_c=bool(flags & CLAMP_C),
            lp_exponents=exponents,
            lp_norms_n=tuple(norms[:half]),
            lp_norms_u=tuple(norms[half:]),
        ))
    return records


def read_records(path: Union[str, Path]) -> List[DiagnosticsRecord]:
    return parse_records(Path(path).read_text(encoding="utf-8"))
