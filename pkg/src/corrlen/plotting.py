"""Figures for scenario reports: PNG via matplotlib and raw SVG polylines."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def write_svg_polylines(path, curves, xlabel: str = "", ylabel: str = "", title: str = "",
                        width: int = 640, height: int = 480, digits: int = 6) -> None:
    """Write ``curves = [(label, xs, ys), ...]`` as SVG axes and polylines.

    Only ``<line>``, ``<polyline>`` and ``<text>`` primitives are used, so
    the numbers can be read back from the file.
    """
    finite = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in curves]
    finite = [(lab, x[np.isfinite(x) & np.isfinite(y)], y[np.isfinite(x) & np.isfinite(y)])
              for lab, x, y in finite]
    xs = np.concatenate([c[1] for c in finite if c[1].size] or [np.array([0.0, 1.0])])
    ys = np.concatenate([c[2] for c in finite if c[2].size] or [np.array([0.0, 1.0])])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    fmt = f"{{:.{digits}g}}"
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
           f'<text x="{ml}" y="{height - 10}" font-size="12">{escape(xlabel)} '
           f'[{fmt.format(x0)}, {fmt.format(x1)}]</text>',
           f'<text x="5" y="{mt - 10}" font-size="12">{escape(ylabel)} '
           f'[{fmt.format(y0)}, {fmt.format(y1)}]</text>']
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="15" font-size="13" text-anchor="middle">{escape(title)}</text>')
    for i, (lab, x, y) in enumerate(finite):
        if x.size == 0:
            continue
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        data = " ".join(f"{fmt.format(a)},{fmt.format(b)}" for a, b in zip(x, y))
        col = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{col}" points="{pts}" data-xy="{data}">'
                   f'<title>{escape(str(lab))}</title></polyline>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def plot_nu_curves(path, curves, norms=None) -> None:
    """``curves = [(label, lambdas, nus), ...]``; dashed lines mark ``|s|``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (lab, lam, nu) in enumerate(curves):
        col = PALETTE[i % len(PALETTE)]
        ax.plot(lam, nu, "o-", ms=3, color=col, label=lab)
        if norms is not None:
            ax.axhline(norms[i], color=col, ls="--", lw=0.8)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\nu_s(\lambda)$")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_saturation_phase(path, angles, lam_sat, lam_tilde) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.degrees(angles), lam_sat, "o-", label=r"$\lambda_{sat}$")
    ax.plot(np.degrees(angles), lam_tilde, "x--", label=r"$\tilde\lambda$")
    ax.set_xlabel("direction angle (deg)")
    ax.set_ylabel(r"$\lambda$")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    _save(fig, path)


def plot_prefactor(path, curves, d: int) -> None:
    """``log G + nu n`` against ``log n``, with the reference slope ``-(d-1)/2``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (lab, logn, y) in enumerate(curves):
        ax.plot(logn, y, "-", color=PALETTE[i % len(PALETTE)], label=lab)
    if curves:
        lo, hi = min(c[1][0] for c in curves), max(c[1][-1] for c in curves)
        ref = curves[0][2][0]
        ax.plot([lo, hi], [ref, ref - (d - 1) / 2 * (hi - lo)], "k:", lw=1, label="OZ slope")
    ax.set_xlabel(r"$\log n$")
    ax.set_ylabel(r"$\log G(0,[ns]) + \nu n$")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_profiles(path, profiles) -> None:
    """Boundary profiles ``f(tau)`` per direction on log-log axes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (lab, prof) in enumerate(profiles):
        col = PALETTE[i % len(PALETTE)]
        for sd in prof.sides:
            keep = sd.f > 0
            if np.any(keep):
                ax.loglog(sd.taus[keep], sd.f[keep], "-", color=col, lw=0.8)
        ax.plot([], [], color=col, label=lab)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$f(\tau v)$")
    ax.legend(fontsize=7)
    _save(fig, path)


def angle_of(s) -> float:
    s = np.asarray(s, dtype=float)
    return math.atan2(s[1], s[0]) if s.size > 1 else 0.0
