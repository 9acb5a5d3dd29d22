"""Branch CSV and solution JSON files, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .constitutive import BodyForce, ConstitutiveModel
from .diagnostics import DiagnosticsRecord
from .discretization import SolutionField, StripGrid

BRANCH_HEADER = ["s", "lambda", "amplitude", "width_half", "e_min", "H_max_dev",
                 "residual", "newton_iters", "nodal_ok", "termination"]

FORMAT_VERSION = 1


class SerializationError(OSError):
    """File could not be written or read back; the message carries the path."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise SerializationError(f"cannot write {path}: {exc}") from exc


def branch_rows(branch, termination: Optional[str] = None) -> List[List[str]]:
    points = list(branch)
    if termination is None:
        term = getattr(branch, "termination", None)
        termination = term.value if term is not None else ""
    rows = []
    for k, p in enumerate(points):
        d = p.diagnostics
        rows.append([_fmt(p.s), _fmt(p.field.lam), _fmt(d.amplitude), _fmt(d.width_half),
                     _fmt(d.e_min), _fmt(d.H_max_dev), _fmt(d.residual_norm),
                     str(int(p.newton_iterations)), "true" if d.nodal.all_ok else "false",
                     termination if k == len(points) - 1 else ""])
    return rows


def write_branch(branch, path, termination: Optional[str] = None) -> None:
    """One CSV row per accepted point; the last row carries the termination reason."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BRANCH_HEADER)
    w.writerows(branch_rows(branch, termination))
    atomic_write_text(path, buf.getvalue())


def read_branch(path) -> List[Dict[str, object]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != BRANCH_HEADER:
                raise SerializationError(f"{path}: unexpected header {reader.fieldnames}")
            out = []
            for row in reader:
                rec: Dict[str, object] = {k: float(row[k]) for k in BRANCH_HEADER[:7]}
                rec["newton_iters"] = int(row["newton_iters"])
                rec["nodal_ok"] = row["nodal_ok"] == "true"
                rec["termination"] = row["termination"]
                out.append(rec)
            return out
    except OSError as exc:
        if isinstance(exc, SerializationError):
            raise
        raise SerializationError(f"cannot read {path}: {exc}") from exc


def _model_dict(model: Optional[ConstitutiveModel]):
    if model is None:
        return None
    return {"coeffs": list(model.coeffs), "kind": model.model_kind.value,
            "q_probe_max": model.q_probe_max, "xi1": model.xi1, "q1": model.q1}


def solution_document(field: SolutionField, diagnostics: Optional[DiagnosticsRecord] = None,
                      model: Optional[ConstitutiveModel] = None,
                      force: Optional[BodyForce] = None) -> Dict:
    g = field.grid
    return {
        "format_version": FORMAT_VERSION,
        "grid": {"L": g.L, "Nx": g.Nx, "Ny": g.Ny, "hx": g.hx, "hy": g.hy,
                 "order": "row-major, x index outer"},
        "lambda": field.lam,
        "u": field.u.ravel().tolist(),
        "diagnostics": diagnostics.to_dict() if diagnostics is not None else None,
        "model": _model_dict(model),
        "force": {"odd_coeffs": list(force.odd_coeffs)} if force is not None else None,
    }


def write_solution(field: SolutionField, path, diagnostics: Optional[DiagnosticsRecord] = None,
                   model: Optional[ConstitutiveModel] = None, force: Optional[BodyForce] = None) -> None:
    """JSON snapshot; floats are written in shortest round-trip form."""
    doc = solution_document(field, diagnostics, model, force)
    atomic_write_text(path, json.dumps(doc, allow_nan=False))


def read_solution(path):
    """Inverse of :func:`write_solution`.

    Returns
    -------
    field : SolutionField
    diagnostics : DiagnosticsRecord or None
    model : ConstitutiveModel or None
    force : BodyForce or None
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SerializationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SerializationError(f"{path}: malformed JSON: {exc}") from exc
    try:
        g = doc["grid"]
        grid = StripGrid(float(g["L"]), int(g["Nx"]), int(g["Ny"]))
        u = np.asarray(doc["u"], dtype=float).reshape(grid.shape)
        field = SolutionField(grid, u, float(doc["lambda"]))
        diag = doc.get("diagnostics")
        diag = DiagnosticsRecord.from_dict(diag) if diag is not None else None
        m = doc.get("model")
        model = None
        if m is not None:
            model = ConstitutiveModel(tuple(m["coeffs"]), m["kind"], m["q_probe_max"], m["xi1"], m["q1"])
        fd = doc.get("force")
        force = BodyForce(tuple(fd["odd_coeffs"])) if fd is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise SerializationError(f"{path}: invalid solution document: {exc}") from exc
    return field, diag, model, force
