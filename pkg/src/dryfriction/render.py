"""Deterministic SVG rendering of 1D interface profiles over the obstacles."""
import numpy as np

from .errors import ContractError

_SCALE = 400.0  # pixels per unit length, equal on both axes
_RAMP_STOPS = 8


def _num(x):
    return format(float(x), ".3f")


def render_profile_svg(snapshot, field, path=None):
    """SVG of the profile ``snapshot.u`` over the obstacle disks of ``field``.

    Each center becomes one ``<circle>`` of radius ``rho + delta`` filled
    with a shared radial gradient whose opacity follows the strength ramp,
    so opacity is proportional to ``phi``. Only ``n = 1`` is supported.
    Returns the SVG text and writes it to ``path`` when given.
    """
    if snapshot.grid.n != 1 or field.spec.dimension != 1:
        raise ContractError("profile rendering supports n = 1 only")
    spec = field.spec
    reach = spec.reach
    top = spec.slab_half_height + reach
    u = snapshot.u
    top = max(top, float(np.max(np.abs(u))) if u.size else 0.0)
    width = _SCALE
    height = 2.0 * top * _SCALE

    def sx(x):
        return x * _SCALE

    def sy(h):
        return (top - h) * _SCALE

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">\n',
        "<defs>\n",
        '<radialGradient id="obstacle" cx="0.5" cy="0.5" r="0.5">\n',
    ]
    # strength along a radius: 1 up to rho - delta, smooth ramp to 0 at reach
    rho, delta = spec.radius, spec.mollification_width
    for r in np.linspace(rho - delta, reach, _RAMP_STOPS + 1):
        t = min(max((reach - r) / (2 * delta), 0.0), 1.0)
        phi = t * t * (3 - 2 * t)
        out.append(f'<stop offset="{_num(r / reach)}" stop-color="#1f4e79" stop-opacity="{_num(phi)}"/>\n')
    out.append("</radialGradient>\n")
    out.append(f'<clipPath id="torus"><rect x="0" y="0" width="{_num(width)}" height="{_num(height)}"/></clipPath>\n')
    out.append("</defs>\n")
    out.append('<g clip-path="url(#torus)">\n')
    for c in field.centers:
        out.append(f'<circle cx="{_num(sx(c[0]))}" cy="{_num(sy(c[1]))}" r="{_num(reach * _SCALE)}" '
                   'fill="url(#obstacle)"/>\n')
    out.append("</g>\n")
    xs = np.arange(u.size + 1) / u.size
    us = np.append(u, u[:1])  # close the period
    pts = " ".join(f"{_num(sx(x))},{_num(sy(h))}" for x, h in zip(xs, us))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#c00000" stroke-width="1.5"/>\n')
    out.append("</svg>\n")
    text = "".join(out)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
