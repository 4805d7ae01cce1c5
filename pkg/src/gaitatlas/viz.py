"""Deterministic SVG rendering of atlas results.

Hand-rolled SVG (no plotting dependency) so identical inputs produce
byte-identical files: branch diagrams on the speed/pitch-rate plane,
footfall bars over stride phase, and stick-figure keyframe strips.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["branch_diagram_svg", "footfall_svg", "keyframes_svg"]

_COLORS = {
    "PF": "#1f77b4", "BG": "#ff7f0e", "BE": "#d62728",
    "HG": "#bcbd22", "HE": "#8c564b", "FG": "#2ca02c", "FE": "#17becf",
    "GG": "#9467bd", "GE": "#e377c2", "Unknown": "#7f7f7f",
}


def _color(label: str) -> str:
    return _COLORS.get(label.split("-")[0], "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.4f}"


class _Canvas:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, color="#000", width=1.5):
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"/>')

    def circle(self, x, y, r, color="#000", fill="#000"):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" '
            f'stroke="{color}" fill="{fill}"/>')

    def rect(self, x, y, w, h, fill="#000"):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{fill}"/>')

    def text(self, x, y, s, size=12, color="#000", anchor="start"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'fill="{color}" text-anchor="{anchor}" '
            f'font-family="sans-serif">{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def branch_diagram_svg(branches: list, bifurcations: list,
                       width=860, height=560) -> str:
    """Gait branches on the horizontal-speed / pitch-rate plane."""
    pad = 60
    xs, ys = [0.0], [0.0]
    for br in branches:
        xs.extend(float(p["qd_x"]) for p in br["points"])
        ys.extend(float(p["qd_pitch"]) for p in br["points"])
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 - x0 < 1e-9:
        x1 = x0 + 1.0
    span_y = max(y1 - y0, 0.2)
    y0 -= 0.1 * span_y
    y1 += 0.1 * span_y

    def X(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def Y(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    cv = _Canvas(width, height)
    cv.line(pad, Y(0.0), width - pad, Y(0.0), "#cccccc")
    for gx in np.linspace(x0, x1, 9):
        cv.line(X(gx), height - pad, X(gx), height - pad + 5)
        cv.text(X(gx), height - pad + 18, f"{gx:.1f}", 10, anchor="middle")
    for gy in np.linspace(y0, y1, 7):
        cv.line(pad - 5, Y(gy), pad, Y(gy))
        cv.text(pad - 8, Y(gy) + 4, f"{gy:.2f}", 10, anchor="end")
    cv.text(width / 2, height - 14, "horizontal speed qd_x [sqrt(g l)]",
            12, anchor="middle")
    cv.text(14, height / 2, "pitch rate", 12)

    for br in branches:
        pts = [(X(float(p["qd_x"])), Y(float(p["qd_pitch"])))
               for p in br["points"]]
        if len(pts) >= 2:
            cv.polyline(pts, _color(br.get("label", "Unknown")))
        elif pts:
            cv.circle(pts[0][0], pts[0][1], 2.5,
                      _color(br.get("label", "Unknown")),
                      _color(br.get("label", "Unknown")))
        if pts:
            cv.text(pts[-1][0] + 4, pts[-1][1] - 4, br["name"], 11,
                    _color(br.get("label", "Unknown")))
    for bf in bifurcations:
        if bf.get("kind") != "SymmetryBreaking":
            continue
        cv.circle(X(float(bf["qd_x"])), Y(float(bf.get("qd_pitch", 0.0))),
                  4, "#000", "#000")
    return cv.render()


def footfall_svg(orbit_dict: dict, width=720, height=220) -> str:
    """Contact bars per leg over one stride (phases 0..1)."""
    pad = 70
    legs = ["LH", "LF", "RF", "RH"]
    cv = _Canvas(width, height)
    lane_h = (height - 2 * pad + 60) / 4.0
    events = orbit_dict.get("events", [])
    label = ""
    if orbit_dict.get("label"):
        label = orbit_dict["label"].get("label", "")
    cv.text(width / 2, 22,
            f"footfall pattern {label} (qd_x = "
            f"{float(orbit_dict['section_state'][6]):.3f})",
            13, anchor="middle")
    for i, leg in enumerate(legs):
        ytop = pad - 30 + i * lane_h
        cv.text(pad - 10, ytop + lane_h * 0.45, leg, 11, anchor="end")
        cv.line(pad, ytop + lane_h * 0.6, width - pad, ytop + lane_h * 0.6,
                "#dddddd")
        td = [float(e["phase"]) % 1.0 for e in events
              if e["leg"] == leg and e["kind"] == "touchdown"]
        lo = [float(e["phase"]) % 1.0 for e in events
              if e["leg"] == leg and e["kind"] == "liftoff"]
        for t in td:
            l_after = [x for x in lo if x > t]
            end = min(l_after) if l_after else 1.0
            x = pad + t * (width - 2 * pad)
            w = (end - t) * (width - 2 * pad)
            cv.rect(x, ytop + lane_h * 0.15, w, lane_h * 0.55,
                    _color(label or "Unknown"))
            if not l_after and lo:
                # wrapped stance: continues from phase 0
                x2 = pad
                w2 = min(lo) * (width - 2 * pad)
                cv.rect(x2, ytop + lane_h * 0.15, w2, lane_h * 0.55,
                        _color(label or "Unknown"))
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = pad + frac * (width - 2 * pad)
        cv.line(x, height - pad + 18, x, height - pad + 24)
        cv.text(x, height - pad + 38, f"{frac:.2f}", 10, anchor="middle")
    cv.text(width / 2, height - 8, "stride phase", 11, anchor="middle")
    return cv.render()


def keyframes_svg(frames: list, width=900, height=260) -> str:
    """Stick figures (torso segment plus four legs) at key instants.

    ``frames`` holds dicts with the full state ``y``, per-leg stance flags
    and anchors, a caption, and the model joint offsets.
    """
    cv = _Canvas(width, height)
    n = max(len(frames), 1)
    cell = width / n
    scale = min(cell / 3.2, height / 3.4)
    for i, fr in enumerate(frames):
        y = fr["y"]
        cx = (i + 0.5) * cell - y[0] * 0.0
        ground = height - 40
        def WX(wx):
            return cx + (wx - y[0]) * scale
        def WY(wz):
            return ground - wz * scale
        cv.line(i * cell + 6, ground, (i + 1) * cell - 6, ground,
                "#888888", 1.2)
        c, s = math.cos(y[2]), math.sin(y[2])
        offs = fr["offsets"]
        hx, hz = y[0] + offs[0] * c, y[1] + offs[0] * s
        fx, fz = y[0] + offs[1] * c, y[1] + offs[1] * s
        cv.line(WX(hx), WY(hz), WX(fx), WY(fz), "#333333", 3.0)
        cv.circle(WX(y[0]), WY(y[1]), 3, "#000", "#ffffff")
        for leg in range(4):
            jx, jz = (hx, hz) if leg in (0, 3) else (fx, fz)
            if fr["stance"][leg]:
                ax = fr["anchors"][leg]
                cv.line(WX(jx), WY(jz), WX(ax), WY(0.0), "#000000", 1.5)
                cv.circle(WX(ax), WY(0.0), 2.5, "#000", "#000")
            else:
                th = y[3 + leg] + y[2]
                tx = jx + math.sin(th)
                tz = jz - math.cos(th)
                cv.line(WX(jx), WY(jz), WX(tx), WY(tz), "#999999", 1.2)
        cv.text((i + 0.5) * cell, height - 12, fr["caption"], 10,
                anchor="middle")
    return cv.render()
