"""File formats, the analysis pipeline, report serialization, and SVG output.

Formats
-------
Trace (text): first line holds comma-separated variable labels; every further
line holds p comma-separated 0/1 digits, one kept draw per line.

Trace (binary): magic bytes ``CCS1``, little-endian u32 N, u32 p, then N rows
of ceil(p/8) bytes, row-major, least-significant bit first within each byte.

Design matrix (text): optional ``#`` comment lines, then a header line
``y,<label>,...`` and one numeric row per observation.

Report: JSON with a versioned ``schema`` field (``ccs_report_v1``).  Every
probability is stored as an exact ``[numerator, denominator]`` pair so masses
survive round-trips bit-for-bit; floats rely on shortest-repr JSON encoding.

All writers go through a write-temp-then-rename so partially written files
never appear under the target name.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import xml.etree.ElementTree as ElementTree
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .credible import CartesianCredibleSet, CriterionTrace, select_partition
from .factorize import PartitionSequence, agglomerate
from .model_space import Model, SampleTrace
from .summaries import EmptyRetainedSetError, screen, summarize

__all__ = [
    "TraceFormatError",
    "SchemaError",
    "RunConfig",
    "Report",
    "read_trace",
    "write_trace",
    "read_design",
    "write_design",
    "write_report",
    "read_report",
    "report_credible_set",
    "write_distribution",
    "read_distribution",
    "analyze_trace",
    "render_svg",
    "SvgStyle",
]

_TRACE_MAGIC = b"CCS1"
REPORT_SCHEMA = "ccs_report_v1"


class TraceFormatError(ValueError):
    """Raised on malformed trace files; carries a 1-based line number."""


class SchemaError(ValueError):
    """Raised when a report file's schema field is missing or unsupported."""


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# trace files


def write_trace(trace: SampleTrace, path, fmt: str = "text") -> None:
    if fmt == "text":
        lines = [",".join(trace.labels)]
        digits = trace.matrix.astype("U1")
        lines.extend(",".join(row) for row in digits)
        _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
    elif fmt == "binary":
        header = _TRACE_MAGIC + np.array(
            [trace.n_samples, trace.n_variables], dtype="<u4"
        ).tobytes()
        body = np.packbits(trace.matrix, axis=1, bitorder="little").tobytes()
        labels = (",".join(trace.labels) + "\n").encode()
        _atomic_write_bytes(path, header + body + labels)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def _read_trace_binary(raw: bytes, path) -> SampleTrace:
    if len(raw) < 12:
        raise TraceFormatError(f"{path}: truncated binary trace header")
    n, p = np.frombuffer(raw[4:12], dtype="<u4")
    n, p = int(n), int(p)
    width = (p + 7) // 8
    end = 12 + n * width
    if len(raw) < end:
        raise TraceFormatError(f"{path}: binary trace body shorter than declared")
    rows = np.frombuffer(raw[12:end], dtype=np.uint8).reshape(n, width)
    matrix = np.unpackbits(rows, axis=1, count=p, bitorder="little")
    tail = raw[end:].decode().strip()
    labels = tail.split(",") if tail else [f"x{i + 1}" for i in range(p)]
    if len(labels) != p:
        raise TraceFormatError(f"{path}: binary trace has {len(labels)} labels for p={p}")
    return SampleTrace(matrix, labels)


def _read_trace_text_slow(body: bytes, labels: list[str], path) -> SampleTrace:
    p = len(labels)
    rows = []
    for lineno, line in enumerate(body.decode().splitlines(), start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != p:
            raise TraceFormatError(
                f"{path}:{lineno}: expected {p} columns, got {len(parts)}"
            )
        row = []
        for value in parts:
            if value == "0":
                row.append(0)
            elif value == "1":
                row.append(1)
            else:
                raise TraceFormatError(
                    f"{path}:{lineno}: entry {value!r} is not 0 or 1"
                )
        rows.append(row)
    if not rows:
        raise TraceFormatError(f"{path}: trace holds no samples")
    return SampleTrace(np.array(rows, dtype=np.uint8), labels)


def read_trace(path) -> SampleTrace:
    """Read a trace file, auto-detecting the text and binary formats."""
    raw = Path(path).read_bytes()
    if raw.startswith(_TRACE_MAGIC):
        return _read_trace_binary(raw, path)
    raw = raw.replace(b"\r\n", b"\n")
    newline = raw.find(b"\n")
    if newline < 0:
        raise TraceFormatError(f"{path}: missing sample rows after the label line")
    labels = raw[:newline].decode().split(",")
    labels = [l.strip() for l in labels]
    if any(not l for l in labels):
        raise TraceFormatError(f"{path}:1: empty variable label")
    p = len(labels)
    body = raw[newline + 1 :]
    if body and not body.endswith(b"\n"):
        body += b"\n"
    # Fast path: fixed-width rows "d,d,...,d\n" decoded via one frombuffer
    row_bytes = 2 * p
    if body and len(body) % row_bytes == 0:
        grid = np.frombuffer(body, dtype=np.uint8).reshape(-1, row_bytes)
        digits = grid[:, 0::2]
        seps = grid[:, 1::2]
        sep_expected = np.full(p, ord(","), dtype=np.uint8)
        sep_expected[-1] = ord("\n")
        if (seps == sep_expected).all() and np.isin(digits, (48, 49)).all():
            return SampleTrace((digits - 48), labels)
    return _read_trace_text_slow(body, labels, path)


# ---------------------------------------------------------------------------
# design-matrix files


def write_design(y, X, labels: Sequence[str], path, comments: Sequence[str] = ()) -> None:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(["y", *labels]))
    for yi, row in zip(y, X):
        lines.append(",".join(repr(float(v)) for v in (yi, *row)))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_design(path) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    lines = [
        line
        for line in Path(path).read_text().splitlines()
        if line and not line.startswith("#")
    ]
    if not lines:
        raise ValueError(f"{path}: empty design file")
    header = lines[0].split(",")
    if header[0] != "y" or len(header) < 2:
        raise ValueError(f"{path}: design header must start with 'y' and one label")
    labels = tuple(header[1:])
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: design rows do not match the header")
    return data[:, 0], data[:, 1:], labels


# ---------------------------------------------------------------------------
# run configuration and report schema


@dataclass(frozen=True)
class RunConfig:
    """Analysis settings echoed into the report."""

    level: float = 0.5
    penalty_scale: float = 2.0
    screen_tau: float = 0.04
    sign_mode: str = "penalty-added"
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.level <= 1:
            raise ValueError(f"level must be in (0, 1], got {self.level}")
        if self.penalty_scale <= 0:
            raise ValueError(f"penalty scale must be positive, got {self.penalty_scale}")
        if not 0 <= self.screen_tau < 1:
            raise ValueError(f"screen threshold must be in [0, 1), got {self.screen_tau}")
        if self.sign_mode not in ("penalty-added", "paper-literal"):
            raise ValueError(f"unknown sign mode {self.sign_mode!r}")


def _frac_pair(value: Fraction) -> list[int]:
    return [value.numerator, value.denominator]


def _pair_frac(pair) -> Fraction:
    return Fraction(int(pair[0]), int(pair[1]))


@dataclass(frozen=True)
class SubmodelEntry:
    bits: str
    mass: list[int]  # exact [numerator, denominator]
    modal: bool


@dataclass(frozen=True)
class BlockEntry:
    indices: tuple[int, ...]  # original variable indices
    labels: tuple[str, ...]
    pi: list[int]
    block_pip: list[int]
    submodels: tuple[SubmodelEntry, ...]


@dataclass(frozen=True)
class CredibleSetSection:
    level: float
    mass: list[int]
    log_mass: float
    log_size: float
    blocks: tuple[BlockEntry, ...]


@dataclass(frozen=True)
class MergeEntry:
    first: tuple[int, ...]
    second: tuple[int, ...]
    gain: float


@dataclass(frozen=True)
class CriterionEntry:
    partition_index: int
    log_size: float
    penalty: float
    criterion: float
    chosen: bool


@dataclass(frozen=True)
class ScreenedVariable:
    index: int
    label: str
    pip: float


@dataclass(frozen=True)
class Report:
    """Everything the pipeline learned from one trace, in plain data.

    ``status`` is ``"ok"`` or ``"empty-retained-set"``; in the latter case
    the partition/criterion/credible-set sections are empty.  The
    correlation matrix is stored for retained variables only (screened
    variables appear with their PIPs under ``screened_out``).
    """

    status: str
    config: RunConfig
    n_samples: int
    labels: tuple[str, ...]
    pips: tuple[float, ...]
    median_model: str
    map_model_estimate: str
    retained: tuple[int, ...]
    screened_out: tuple[ScreenedVariable, ...]
    inclusion_correlation_retained: tuple[tuple[float, ...], ...]
    etas: tuple[float, ...]
    merges: tuple[MergeEntry, ...]
    criterion: tuple[CriterionEntry, ...]
    chosen_partition_index: int | None
    credible_set: CredibleSetSection | None
    schema: str = REPORT_SCHEMA

    def to_dict(self) -> dict:
        out: dict = {"schema": self.schema, "status": self.status}
        out["config"] = {
            "level": self.config.level,
            "penalty_scale": self.config.penalty_scale,
            "screen_tau": self.config.screen_tau,
            "sign_mode": self.config.sign_mode,
            "seed": self.config.seed,
        }
        out["n_samples"] = self.n_samples
        out["labels"] = list(self.labels)
        out["pips"] = list(self.pips)
        out["median_model"] = self.median_model
        out["map_model_estimate"] = self.map_model_estimate
        out["retained"] = list(self.retained)
        out["screened_out"] = [
            {"index": s.index, "label": s.label, "pip": s.pip}
            for s in self.screened_out
        ]
        out["inclusion_correlation_retained"] = [
            list(row) for row in self.inclusion_correlation_retained
        ]
        out["etas"] = list(self.etas)
        out["merges"] = [
            {"first": list(m.first), "second": list(m.second), "gain": m.gain}
            for m in self.merges
        ]
        out["criterion"] = [
            {
                "partition_index": c.partition_index,
                "log_size": c.log_size,
                "penalty": c.penalty,
                "criterion": c.criterion,
                "chosen": c.chosen,
            }
            for c in self.criterion
        ]
        out["chosen_partition_index"] = self.chosen_partition_index
        if self.credible_set is None:
            out["credible_set"] = None
        else:
            cs = self.credible_set
            out["credible_set"] = {
                "level": cs.level,
                "mass": cs.mass,
                "log_mass": cs.log_mass,
                "log_size": cs.log_size,
                "blocks": [
                    {
                        "indices": list(b.indices),
                        "labels": list(b.labels),
                        "pi": b.pi,
                        "block_pip": b.block_pip,
                        "submodels": [
                            {"bits": s.bits, "mass": s.mass, "modal": s.modal}
                            for s in b.submodels
                        ],
                    }
                    for b in cs.blocks
                ],
            }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        if data.get("schema") != REPORT_SCHEMA:
            raise SchemaError(
                f"unsupported report schema {data.get('schema')!r}; "
                f"expected {REPORT_SCHEMA!r}"
            )
        cfg = data["config"]
        config = RunConfig(
            level=cfg["level"],
            penalty_scale=cfg["penalty_scale"],
            screen_tau=cfg["screen_tau"],
            sign_mode=cfg["sign_mode"],
            seed=cfg["seed"],
        )
        cs_data = data["credible_set"]
        credible_set = None
        if cs_data is not None:
            credible_set = CredibleSetSection(
                level=cs_data["level"],
                mass=[int(v) for v in cs_data["mass"]],
                log_mass=cs_data["log_mass"],
                log_size=cs_data["log_size"],
                blocks=tuple(
                    BlockEntry(
                        indices=tuple(b["indices"]),
                        labels=tuple(b["labels"]),
                        pi=[int(v) for v in b["pi"]],
                        block_pip=[int(v) for v in b["block_pip"]],
                        submodels=tuple(
                            SubmodelEntry(
                                bits=s["bits"],
                                mass=[int(v) for v in s["mass"]],
                                modal=s["modal"],
                            )
                            for s in b["submodels"]
                        ),
                    )
                    for b in cs_data["blocks"]
                ),
            )
        return cls(
            status=data["status"],
            config=config,
            n_samples=data["n_samples"],
            labels=tuple(data["labels"]),
            pips=tuple(data["pips"]),
            median_model=data["median_model"],
            map_model_estimate=data["map_model_estimate"],
            retained=tuple(data["retained"]),
            screened_out=tuple(
                ScreenedVariable(index=s["index"], label=s["label"], pip=s["pip"])
                for s in data["screened_out"]
            ),
            inclusion_correlation_retained=tuple(
                tuple(row) for row in data["inclusion_correlation_retained"]
            ),
            etas=tuple(data["etas"]),
            merges=tuple(
                MergeEntry(
                    first=tuple(m["first"]), second=tuple(m["second"]), gain=m["gain"]
                )
                for m in data["merges"]
            ),
            criterion=tuple(
                CriterionEntry(
                    partition_index=c["partition_index"],
                    log_size=c["log_size"],
                    penalty=c["penalty"],
                    criterion=c["criterion"],
                    chosen=c["chosen"],
                )
                for c in data["criterion"]
            ),
            chosen_partition_index=data["chosen_partition_index"],
            credible_set=credible_set,
        )


def write_report(report: Report, path) -> None:
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    _atomic_write_bytes(path, payload.encode())


def read_report(path) -> Report:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: report must be a JSON object")
    return Report.from_dict(data)


# ---------------------------------------------------------------------------
# pipeline


def analyze_trace(trace: SampleTrace, config: RunConfig) -> Report:
    """Full post-processing pipeline: summaries, screen, agglomerate, select.

    Returns a report with status ``"empty-retained-set"`` (and no credible
    set) when every variable falls below the screen threshold.
    """
    bundle = summarize(trace, config.screen_tau)
    pv = bundle.pips
    base = dict(
        config=config,
        n_samples=trace.n_samples,
        labels=trace.labels,
        pips=tuple(float(v) for v in pv),
        median_model=str(bundle.median_model),
        map_model_estimate=str(bundle.map_model_estimate),
    )

    try:
        reduced, retained = screen(trace, config.screen_tau)
    except EmptyRetainedSetError:
        return Report(
            status="empty-retained-set",
            retained=(),
            screened_out=tuple(
                ScreenedVariable(index=i, label=trace.labels[i], pip=float(pv[i]))
                for i in range(trace.n_variables)
            ),
            inclusion_correlation_retained=(),
            etas=(),
            merges=(),
            criterion=(),
            chosen_partition_index=None,
            credible_set=None,
            **base,
        )

    screened = tuple(
        ScreenedVariable(index=i, label=trace.labels[i], pip=float(pv[i]))
        for i in range(trace.n_variables)
        if i not in set(retained)
    )
    corr = bundle.inclusion_correlation[np.ix_(retained, retained)]

    sequence = agglomerate(reduced)
    chosen, crit, ccs = select_partition(
        sequence,
        reduced,
        config.level,
        penalty_scale=config.penalty_scale,
        sign_mode=config.sign_mode,
    )

    def to_original(indices: Sequence[int]) -> tuple[int, ...]:
        return tuple(retained[i] for i in indices)

    blocks = tuple(
        BlockEntry(
            indices=to_original(bset.block),
            labels=tuple(trace.labels[retained[i]] for i in bset.block),
            pi=_frac_pair(bset.pi),
            block_pip=_frac_pair(bset.block_pip),
            submodels=tuple(
                SubmodelEntry(
                    bits=str(sub), mass=_frac_pair(mass), modal=(sub == bset.modal)
                )
                for sub, mass in zip(bset.submodels, bset.masses)
            ),
        )
        for bset in ccs.blocks
    )

    return Report(
        status="ok",
        retained=retained,
        screened_out=screened,
        inclusion_correlation_retained=tuple(
            tuple(float(v) for v in row) for row in corr
        ),
        etas=sequence.etas,
        merges=tuple(
            MergeEntry(
                first=to_original(m.first), second=to_original(m.second), gain=m.gain
            )
            for m in sequence.merge_log
        ),
        criterion=tuple(
            CriterionEntry(
                partition_index=r.partition_index,
                log_size=r.log_size,
                penalty=r.penalty,
                criterion=r.criterion,
                chosen=r.chosen,
            )
            for r in crit.rows
        ),
        chosen_partition_index=chosen,
        credible_set=CredibleSetSection(
            level=ccs.level,
            mass=_frac_pair(ccs.mass),
            log_mass=ccs.log_mass,
            log_size=ccs.log_size,
            blocks=blocks,
        ),
        **base,
    )


# ---------------------------------------------------------------------------
# explicit-distribution fixture files and report reconstruction

DIST_SCHEMA = "ccs_dist_v1"


def write_distribution(dist, path) -> None:
    """Serialize an explicit distribution as ``{bits: [num, den]}`` JSON."""
    atoms = {
        str(model): _frac_pair(mass)
        for model, mass in sorted(dist.atoms.items(), key=lambda kv: kv[0].bits)
    }
    payload = json.dumps({"schema": DIST_SCHEMA, "atoms": atoms}, indent=2) + "\n"
    _atomic_write_bytes(path, payload.encode())


def read_distribution(path):
    from .oracle import ExplicitDistribution

    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or data.get("schema") != DIST_SCHEMA:
        raise SchemaError(f"{path}: expected schema {DIST_SCHEMA!r}")
    return ExplicitDistribution.from_mapping(
        {bits: _pair_frac(pair) for bits, pair in data["atoms"].items()}
    )


def report_credible_set(report: Report) -> CartesianCredibleSet:
    """Rebuild the in-memory credible set (exact masses) from a report."""
    from .credible import BlockCredibleSet
    from .model_space import Partition

    cs = report.credible_set
    if cs is None:
        raise ValueError("report carries no credible set")
    blocks = []
    for entry in cs.blocks:
        submodels = tuple(
            Model.from_bits([int(c) for c in s.bits]) for s in entry.submodels
        )
        masses = tuple(_pair_frac(s.mass) for s in entry.submodels)
        modal_flags = [s.modal for s in entry.submodels]
        blocks.append(
            BlockCredibleSet(
                block=tuple(entry.indices),
                submodels=submodels,
                masses=masses,
                pi=_pair_frac(entry.pi),
                block_pip=_pair_frac(entry.block_pip),
                modal=submodels[modal_flags.index(True)],
            )
        )
    return CartesianCredibleSet(
        level=cs.level,
        partition=Partition(tuple(b.block for b in blocks)),
        blocks=tuple(blocks),
        mass=_pair_frac(cs.mass),
        log_mass=cs.log_mass,
        log_size=cs.log_size,
        screened_out=tuple(s.index for s in report.screened_out),
    )


# ---------------------------------------------------------------------------
# SVG rendering


@dataclass(frozen=True)
class SvgStyle:
    """Geometry and the two-colour ramp (0 -> light, 1 -> saturated)."""

    cell: int = 26
    row_height: int = 18
    block_gap: int = 14
    margin: int = 18
    bar_height: int = 3
    light_rgb: tuple[int, int, int] = (247, 240, 245)
    full_rgb: tuple[int, int, int] = (197, 27, 125)
    border: str = "#555555"
    font: str = "monospace"


def _ramp(t: float, style: SvgStyle) -> str:
    t = min(1.0, max(0.0, t))
    channels = (
        round(l + t * (f - l)) for l, f in zip(style.light_rgb, style.full_rgb)
    )
    return "#" + "".join(f"{c:02x}" for c in channels)


def render_svg(report: Report, path=None, style: SvgStyle = SvgStyle()) -> str:
    """Draw the credible set: one row of variable boxes grouped under block
    bars, with each block's sub-models listed beneath as rows of filled and
    empty cells.

    Variable boxes are tinted by block PIP and sub-model rows by sub-model
    mass, both through the style's linear two-colour ramp.  Output is a
    deterministic function of the report; ``path``, if given, is written
    atomically.
    """
    parts: list[str] = []
    cs = report.credible_set
    if cs is None:
        width, height = 360, 60
        parts.append(
            f'<text x="{style.margin}" y="{height // 2}" '
            f'font-family="{style.font}" font-size="13">'
            f"no variables retained at screen threshold "
            f"{report.config.screen_tau}</text>"
        )
    else:
        x = style.margin
        bar_y = style.margin
        box_y = bar_y + style.bar_height + 5
        rows_y = box_y + style.cell + 10
        max_rows = max(len(b.submodels) for b in cs.blocks)
        for block in cs.blocks:
            block_w = len(block.indices) * style.cell
            pip = _pair_frac(block.block_pip)
            parts.append(
                f'<rect x="{x}" y="{bar_y}" width="{block_w}" '
                f'height="{style.bar_height}" fill="#000000"/>'
            )
            for k, label in enumerate(block.labels):
                bx = x + k * style.cell
                parts.append(
                    f'<rect x="{bx}" y="{box_y}" width="{style.cell}" '
                    f'height="{style.cell}" fill="{_ramp(float(pip), style)}" '
                    f'stroke="{style.border}"/>'
                )
                parts.append(
                    f'<text x="{bx + style.cell // 2}" y="{box_y + style.cell // 2 + 4}" '
                    f'font-family="{style.font}" font-size="11" '
                    f'text-anchor="middle">{_xml_escape(label)}</text>'
                )
            for r, sub in enumerate(block.submodels):
                ry = rows_y + r * (style.row_height + 3)
                tint = _ramp(float(_pair_frac(sub.mass)), style)
                for k, bit in enumerate(sub.bits):
                    bx = x + k * style.cell
                    fill = tint if bit == "1" else "#ffffff"
                    parts.append(
                        f'<rect x="{bx + 3}" y="{ry}" width="{style.cell - 6}" '
                        f'height="{style.row_height}" fill="{fill}" '
                        f'stroke="{style.border}"/>'
                    )
                parts.append(
                    f'<text x="{x + block_w + 4}" y="{ry + style.row_height - 4}" '
                    f'font-family="{style.font}" font-size="10">'
                    f"{float(_pair_frac(sub.mass)):.2f}</text>"
                )
            x += block_w + style.block_gap + 26
        width = x - style.block_gap + style.margin
        height = rows_y + max_rows * (style.row_height + 3) + style.margin
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        + "\n".join(parts)
        + "\n</svg>\n"
    )
    ElementTree.fromstring(svg)  # guarantee well-formed XML
    if path is not None:
        _atomic_write_bytes(path, svg.encode())
    return svg


def _xml_escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
