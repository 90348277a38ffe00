from dataclasses import dataclass, field
from typing import List, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .commons import ConfigError
from .dynamics import ADLER_RATE, BENCHMARK_RC, GRW_RATE
from .output import ScanTable
from .scan import ScanKind

AXIS_LABELS = {ScanKind.STABILITY: ('q', 'a'),
               ScanKind.EXCLUSION: ('log10 r_c [m]', 'log10 lambda [1/s]')}


@dataclass(frozen=True)
class Marker:
    """
    :ivar label: Text next to the marker
    :ivar x: Position in plot coordinates (``log10`` for exclusion maps)
    :ivar y: Position in plot coordinates
    """
    label: str
    x: float
    y: float

    @classmethod
    def parse(cls, text: str) -> 'Marker':
        """``LABEL,X,Y`` as given on the command line"""
        parts = text.split(',')
        if len(parts) != 3:
            raise ConfigError(f"marker must read LABEL,X,Y, got '{text}'")
        try:
            return cls(parts[0].strip(), float(parts[1]), float(parts[2]))
        except ValueError:
            raise ConfigError(f"marker coordinates must be numbers: '{text}'")


def benchmark_markers() -> List[Marker]:
    """GRW and Adler points of the exclusion map"""
    log_rc = float(np.log10(BENCHMARK_RC))
    return [Marker('GRW', log_rc, float(np.log10(GRW_RATE))),
            Marker('Adler', log_rc, float(np.log10(ADLER_RATE)))]


@dataclass(frozen=True)
class SvgStyle:
    """
    :ivar width: Image width in px
    :ivar height: Image height in px
    :ivar margin: Space around the plot area in px
    :ivar stable_color: Fill of stable/allowed cells
    :ivar unstable_color: Fill of unstable/excluded cells
    :ivar error_color: Fill of cells flagged with an integration error
    :ivar markers: Labelled points drawn on top of the cells
    """
    width: int = 800
    height: int = 600
    margin: int = 60
    stable_color: str = '#3b6ea8'
    unstable_color: str = '#f2f2f2'
    error_color: str = '#d62728'
    markers: Tuple[Marker, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("SVG width and height must be positive")
        if 2 * self.margin >= min(self.width, self.height):
            raise ConfigError("SVG margin leaves no room for the plot")


def _axis(values: np.ndarray) -> Tuple[np.ndarray, float, float]:
    centers = np.unique(values)
    if centers.size > 1:
        step = (centers[-1] - centers[0]) / (centers.size - 1)
    else:
        step = 1.0
    return centers, centers[0] - 0.5 * step, centers[-1] + 0.5 * step


def render_svg(table: ScanTable, style: SvgStyle = SvgStyle()) -> str:
    """
    Render a scan as SVG text. Stability maps put ``q`` along x and ``a``
    along y; exclusion maps put ``log10 r_c`` along x and ``log10 lambda``
    along y. The output only depends on the table and the style.

    :param table: Scan read by :func:`trapstab.output.read_scan_csv`
    :param style: Size, colours and markers

    :raises ConfigError: duplicated cells

    :return: Complete SVG document
    """
    df = table.df
    if table.kind is ScanKind.STABILITY:
        xs, ys = df['q'].to_numpy(float), df['a'].to_numpy(float)
    else:
        xs = df['log10_rc_m'].to_numpy(float)
        ys = df['log10_lambda_per_s'].to_numpy(float)

    x_centers, x_lo, x_hi = _axis(xs)
    y_centers, y_lo, y_hi = _axis(ys)
    if len(df) != x_centers.size * y_centers.size or \
            df.duplicated(list(df.columns[:2])).any():
        raise ConfigError("malformed CSV, cells do not form a complete grid")

    left = style.margin
    top = style.margin
    plot_w = style.width - 2 * style.margin
    plot_h = style.height - 2 * style.margin
    cell_w = plot_w / x_centers.size
    cell_h = plot_h / y_centers.size

    ii = np.searchsorted(x_centers, xs)
    jj = np.searchsorted(y_centers, ys)
    stable = table.stable
    failed = (df['flags'] != '').to_numpy()

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" '
           f'height="{style.height}" viewBox="0 0 {style.width} {style.height}">',
           f'<rect x="0" y="0" width="{style.width}" height="{style.height}" '
           f'fill="#ffffff"/>',
           '<g id="cells" shape-rendering="crispEdges">']

    for i, j, ok, bad in zip(ii, jj, stable, failed):
        color = style.error_color if bad else \
            (style.stable_color if ok else style.unstable_color)
        x = left + i * cell_w
        y = top + plot_h - (j + 1) * cell_h
        out.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{cell_w:.3f}" '
                   f'height="{cell_h:.3f}" fill="{color}"/>')
    out.append('</g>')

    # frame and axis annotation
    x_label, y_label = AXIS_LABELS[table.kind]
    bottom = top + plot_h
    out.append(f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="#000000" stroke-width="1"/>')
    out.append('<g font-family="sans-serif" font-size="12" fill="#000000">')
    out.append(f'<text x="{left}" y="{bottom + 16}" text-anchor="start">{x_lo:.6g}</text>')
    out.append(f'<text x="{left + plot_w}" y="{bottom + 16}" text-anchor="end">{x_hi:.6g}</text>')
    out.append(f'<text x="{left + plot_w / 2:.3f}" y="{bottom + 36}" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="{left - 6}" y="{bottom}" text-anchor="end">{y_lo:.6g}</text>')
    out.append(f'<text x="{left - 6}" y="{top + 12}" text-anchor="end">{y_hi:.6g}</text>')
    out.append(f'<text x="16" y="{top + plot_h / 2:.3f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + plot_h / 2:.3f})">{escape(y_label)}</text>')
    out.append('</g>')

    if style.markers:
        out.append('<g id="markers" font-family="sans-serif" font-size="12">')
        for marker in style.markers:
            mx = left + (marker.x - x_lo) / (x_hi - x_lo) * plot_w
            my = bottom - (marker.y - y_lo) / (y_hi - y_lo) * plot_h
            out.append(f'<circle cx="{mx:.3f}" cy="{my:.3f}" r="4" fill="#000000"/>')
            out.append(f'<text x="{mx + 6:.3f}" y="{my - 6:.3f}">{escape(marker.label)}</text>')
        out.append('</g>')

    out.append('</svg>')
    return '\n'.join(out) + '\n'
