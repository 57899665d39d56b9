"""Persistência dos resultados: ReportBundle em JSON, tabelas CSV e PDF.

Toda escrita passa por um arquivo temporário no diretório de destino seguido
de ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import re
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

import numpy as np
import scipy
from fpdf import FPDF

from stratsim import __version__
from stratsim.config import config_hash
from stratsim.simulator import GENERATOR_NAME

# Lock para criação concorrente de diretórios
dir_lock = threading.Lock()

# valor fixo de /CreationDate (fpdf 1.7 grava datetime.now())
PDF_CREATION_DATE = "19700101000000"


def ensure_output_dir(path: str) -> None:
    """Garante que o diretório de saída existe."""
    with dir_lock:
        if path and not os.path.exists(path):
            os.makedirs(path)


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(path) or "."
    ensure_output_dir(directory)
    unique_id = uuid.uuid4().hex[:8]
    temp_path = os.path.join(directory, f"tmp_{unique_id}_{os.path.basename(path)}")
    try:
        with open(temp_path, "wb") as f:
            f.write(data)
        os.replace(temp_path, path)
    finally:
        if os.path.exists(temp_path):
            os.remove(temp_path)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def format_cell(value: Any) -> str:
    """Floats com 17 dígitos significativos; None vira célula vazia."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    if isinstance(value, (list, tuple)):
        return " ".join(format_cell(v) for v in value)
    return str(value)


def write_csv(path: str, rows: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    atomic_write_text(path, buf.getvalue())


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def write_json(path: str, data: Any) -> None:
    # floats saem com repr (sem perda); infinito vira "Infinity"
    text = json.dumps(to_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False)
    atomic_write_text(path, text + "\n")


@dataclass
class ReportBundle:
    command: str
    config: dict
    payload: Any
    rng: str | None = None
    extra_metadata: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def metadata(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "versions": {
                "stratsim": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "rng": self.rng,
            **self.extra_metadata,
        }

    def to_dict(self) -> dict:
        return {"metadata": self.metadata(), "config": self.config, "payload": self.payload}

    def write(self, directory: str) -> str:
        """Grava ``<comando>.json`` e o sidecar ``<comando>.run.json`` com os horários."""
        path = os.path.join(directory, f"{self.command}.json")
        write_json(path, self.to_dict())
        write_json(
            os.path.join(directory, f"{self.command}.run.json"),
            {"finished_at": datetime.now(timezone.utc).isoformat(), "config_hash": self.config_hash},
        )
        return path


def simulation_rng() -> str:
    return f"{GENERATOR_NAME} (SeedSequence(seed).spawn(2): proposições, comportamentos)"


def load_bundle(path: str) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def table_to_pdf(rows: Iterable[Sequence[Any]], output_path: str, title: str | None = None) -> None:
    """Escreve uma tabela de texto em PDF, uma linha por registro."""
    pdf = FPDF()
    pdf.set_auto_page_break(auto=True, margin=15)
    pdf.add_page()
    if title:
        pdf.set_font("Arial", "B", size=12)
        pdf.multi_cell(0, 8, _latin1(title))
    pdf.set_font("Courier", size=9)
    for row in rows:
        # fpdf 1.7 só aceita latin-1
        pdf.multi_cell(0, 6, _latin1("  ".join(format_cell(c) for c in row)))
    atomic_write_bytes(output_path, pdf_bytes(pdf))


def pdf_bytes(pdf: FPDF) -> bytes:
    """Documento em bytes com a data de criação fixa (mesmo tamanho, xref intacta)."""
    data = pdf.output(dest="S").encode("latin-1")
    return re.sub(rb"(/CreationDate \(D:)\d{14}", rb"\g<1>" + PDF_CREATION_DATE.encode("ascii"), data, count=1)


def _latin1(text: str) -> str:
    return text.encode("latin-1", errors="replace").decode("latin-1")
