"""Gráficos estáticos: trajetórias de crença e comparação de payoffs.

PDF vetorial via fpdf e PNG via Pillow, sobre a mesma superfície lógica de
1000 x 600 unidades. Cada gráfico sai com um CSV dos dados desenhados.
"""

from __future__ import annotations

import io
import logging
import os
from typing import Sequence

import numpy as np
from fpdf import FPDF
from PIL import Image, ImageDraw

from stratsim.core import PreconditionError
from stratsim.report import atomic_write_bytes, ensure_output_dir, load_bundle, pdf_bytes, write_csv
from stratsim.simulator import Trajectory, read_trajectory

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 1000, 600
MARGIN = 70
MAX_POINTS = 500
PALETTE = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
]
SUPPORTED = {"pdf", "png"}


class PdfCanvas:
    # A4 paisagem: 297 x 210 mm
    scale = 0.27

    def __init__(self) -> None:
        self.pdf = FPDF(orientation="L", unit="mm", format="A4")
        self.pdf.add_page()
        self.pdf.set_font("Arial", size=8)

    def line(self, x1, y1, x2, y2, color=(0, 0, 0), width=1.0):
        self.pdf.set_draw_color(*color)
        self.pdf.set_line_width(0.2 * width)
        s = self.scale
        self.pdf.line(10 + x1 * s, 10 + y1 * s, 10 + x2 * s, 10 + y2 * s)

    def rect(self, x, y, w, h, color):
        self.pdf.set_fill_color(*color)
        s = self.scale
        self.pdf.rect(10 + x * s, 10 + y * s, w * s, h * s, style="F")

    def text(self, x, y, label):
        s = self.scale
        self.pdf.text(10 + x * s, 10 + y * s, label.encode("latin-1", "replace").decode("latin-1"))

    def save(self, path: str) -> None:
        atomic_write_bytes(path, pdf_bytes(self.pdf))


class PngCanvas:
    def __init__(self) -> None:
        self.img = Image.new("RGB", (WIDTH, HEIGHT), "white")
        self.draw = ImageDraw.Draw(self.img)

    def line(self, x1, y1, x2, y2, color=(0, 0, 0), width=1.0):
        self.draw.line([(x1, y1), (x2, y2)], fill=color, width=max(1, int(round(width))))

    def rect(self, x, y, w, h, color):
        self.draw.rectangle([x, y, x + w, y + h], fill=color)

    def text(self, x, y, label):
        self.draw.text((x, y - 10), label, fill=(0, 0, 0))

    def save(self, path: str) -> None:
        buf = io.BytesIO()
        self.img.save(buf, "PNG")
        atomic_write_bytes(path, buf.getvalue())


def _canvases(formats: Sequence[str]):
    unknown = set(formats) - SUPPORTED
    if unknown:
        raise PreconditionError(f"Formato de gráfico não suportado: {sorted(unknown)}")
    for fmt in formats:
        yield fmt, PdfCanvas() if fmt == "pdf" else PngCanvas()


def _axes(canvas, title: str, y_label: str) -> None:
    x0, y0 = MARGIN, HEIGHT - MARGIN
    canvas.line(x0, y0, WIDTH - MARGIN / 2, y0)
    canvas.line(x0, y0, x0, MARGIN / 2)
    canvas.text(x0, MARGIN / 2 - 8, title)
    canvas.text(8, MARGIN / 2 + 10, y_label)
    for tick in (0.0, 0.5, 1.0):
        y = _y(tick, 0.0, 1.0)
        canvas.line(x0 - 5, y, x0, y)
        canvas.text(x0 - 40, y + 4, f"{tick:.1f}")


def _x(t: float, t_max: float) -> float:
    return MARGIN + (WIDTH - 1.5 * MARGIN) * (t / t_max if t_max else 0.0)


def _y(v: float, lo: float, hi: float) -> float:
    return HEIGHT - MARGIN - (HEIGHT - 1.5 * MARGIN) * ((v - lo) / (hi - lo))


def _thin(times: np.ndarray, beliefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if times.size <= MAX_POINTS:
        return times, beliefs
    idx = np.unique(np.linspace(0, times.size - 1, MAX_POINTS).astype(int))
    return times[idx], beliefs[idx]


def belief_chart(trajectories: Sequence[Trajectory], names: Sequence[str], out_base: str, formats: Sequence[str]) -> list[str]:
    """mu_t(q_i) contra t: uma linha por modelo e por seed (faixa de seeds na mesma cor)."""
    if not trajectories:
        raise PreconditionError("Nenhuma trajetória para desenhar")
    t_max = max(float(t.snapshot_times[-1]) for t in trajectories)
    rows = []
    for traj in trajectories:
        for t, w in zip(traj.snapshot_times, traj.snapshot_beliefs):
            rows.append({"seed": traj.seed, "t": int(t), **{f"belief_{n}": float(x) for n, x in zip(names, w)}})

    written = []
    for fmt, canvas in _canvases(formats):
        _axes(canvas, f"Crenca mu_t ({len(trajectories)} seeds)", "mu")
        for traj in trajectories:
            times, beliefs = _thin(traj.snapshot_times, traj.snapshot_beliefs)
            for i in range(beliefs.shape[1]):
                color = PALETTE[i % len(PALETTE)]
                xs = [_x(float(t), t_max) for t in times]
                ys = [_y(float(v), 0.0, 1.0) for v in beliefs[:, i]]
                for a in range(len(xs) - 1):
                    canvas.line(xs[a], ys[a], xs[a + 1], ys[a + 1], color, 1.0)
        for i, name in enumerate(names):
            color = PALETTE[i % len(PALETTE)]
            canvas.rect(WIDTH - 160, MARGIN + 20 * i, 12, 12, color)
            canvas.text(WIDTH - 140, MARGIN + 20 * i + 11, name)
        canvas.text(WIDTH / 2, HEIGHT - MARGIN / 3, f"t (0 a {int(t_max)})")
        path = f"{out_base}.{fmt}"
        canvas.save(path)
        written.append(path)
    write_csv(f"{out_base}.csv", rows)
    written.append(f"{out_base}.csv")
    return written


def payoff_bars(bars: Sequence[tuple[str, float]], out_base: str, formats: Sequence[str], title: str = "Payoffs") -> list[str]:
    """Barras lado a lado (por exemplo estratégico contra ingênuo)."""
    if not bars:
        raise PreconditionError("Nenhum valor para o gráfico de barras")
    values = [v for _, v in bars]
    lo = min(0.0, min(values))
    hi = max(1.0, max(values))
    written = []
    for fmt, canvas in _canvases(formats):
        _axes(canvas, title, "payoff")
        slot = (WIDTH - 1.5 * MARGIN) / len(bars)
        base_y = _y(max(lo, 0.0), lo, hi)
        for k, (label, value) in enumerate(bars):
            x = MARGIN + slot * k + slot * 0.2
            top = _y(value, lo, hi)
            canvas.rect(x, min(top, base_y), slot * 0.6, abs(base_y - top), PALETTE[k % len(PALETTE)])
            canvas.text(x, min(top, base_y) - 6, f"{value:.4f}")
            canvas.text(x, HEIGHT - MARGIN + 18, label)
        path = f"{out_base}.{fmt}"
        canvas.save(path)
        written.append(path)
    write_csv(f"{out_base}.csv", [{"label": label, "value": value} for label, value in bars])
    written.append(f"{out_base}.csv")
    return written


def bars_from_bundle(bundle: dict) -> list[tuple[str, tuple[str, float]]]:
    """Extrai pares de barras de um relatório: (nome do gráfico, barras)."""
    command = bundle.get("metadata", {}).get("command")
    payload = bundle.get("payload", {})
    charts = []
    if command == "trust":
        charts.append(("trust", [("estrategico", payload["strategic_value"]), ("ingenuo", payload["naive_value"])]))
    elif command == "counterfactual":
        charts.append(
            (
                "counterfactual",
                [
                    ("previsto", payload["predicted"]),
                    ("atual", payload["current_true"]),
                    ("verdadeiro", payload["true_strategic"]),
                ],
            )
        )
    elif command == "solve":
        table = payload["solution"]["per_candidate_table"]
        best = payload["solution"]["candidate_id"]
        charts.append(("solve", [("q_br", table[0]["platform_payoff"]), ("q*", table[best]["platform_payoff"])]))
    elif command == "reproduce":
        for rep in payload["reports"]:
            c = rep["computed"]
            if rep["prop_id"] == 3 and "strategic_platform" in c:
                charts.append(("prop3", [("estrategico", c["strategic_platform"]), ("ingenuo", c["naive_platform"])]))
            if rep["prop_id"] == 4 and "predicted_cf" in c:
                charts.append(
                    (
                        "prop4",
                        [("previsto_cf", c["predicted_cf"]), ("atual", c["true_p"]), ("verdadeiro_cf", c["true_cf"])],
                    )
                )
            if rep["prop_id"] == 5 and "platform_after" in c:
                charts.append(("prop5", [("antes", c["platform_before"]), ("depois", c["platform_after"])]))
    return charts


def emit_charts(inputs: str, out_dir: str, formats: Sequence[str] = ("pdf",)) -> list[str]:
    """Gera gráficos a partir de um diretório de trajetórias ou de um relatório JSON."""
    if not os.path.exists(inputs):
        raise FileNotFoundError(inputs)
    ensure_output_dir(out_dir)
    if os.path.isdir(inputs):
        files = sorted(f for f in os.listdir(inputs) if f.endswith(".jsonl"))
        if not files:
            raise PreconditionError(f"Nenhum arquivo .jsonl em {inputs}")
        loaded = [read_trajectory(os.path.join(inputs, f)) for f in files]
        names = loaded[0][0].get("models") or [f"q{i + 1}" for i in range(loaded[0][1].snapshot_beliefs.shape[1])]
        written = belief_chart([t for _, t in loaded], names, os.path.join(out_dir, "crencas"), formats)
    else:
        bundle = load_bundle(inputs)
        charts = bars_from_bundle(bundle)
        if not charts:
            raise PreconditionError(f"Relatório sem valores de payoff para desenhar: {inputs}")
        written = []
        for name, bars in charts:
            written += payoff_bars(bars, os.path.join(out_dir, f"payoffs_{name}"), formats, f"Payoffs ({name})")
    logger.info("%d arquivos de gráfico gravados em %s", len(written), out_dir)
    return written
