"""Composite Simpson quadrature on [0, T].

Everything that integrates in time goes through here so that audits,
samplers and the dual operator use one rule.
"""

import numpy as np


def simpson_nodes(horizon, panels):
    """Return the ``2 * panels + 1`` evaluation nodes of composite Simpson on [0, horizon]."""
    if panels < 1:
        raise ValueError("panels must be >= 1")
    return np.linspace(0.0, float(horizon), 2 * int(panels) + 1)


def simpson(values, horizon):
    """Integrate samples taken on :func:`simpson_nodes` along the last axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if n < 3 or n % 2 == 0:
        raise ValueError("need an odd number (>= 3) of nodes")
    h = float(horizon) / (n - 1)
    total = values[..., 0] + values[..., -1]
    total = total + 4.0 * values[..., 1:-1:2].sum(axis=-1)
    total = total + 2.0 * values[..., 2:-1:2].sum(axis=-1)
    return total * h / 3.0


def cumulative_simpson(values, horizon):
    """Running Simpson integral at panel boundaries.

    ``values`` holds ``2m + 1`` samples along the last axis; the result has
    ``m + 1`` entries, starting at 0.  Panel weights are positive, so the
    output is nondecreasing whenever the integrand is nonnegative.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if n < 3 or n % 2 == 0:
        raise ValueError("need an odd number (>= 3) of nodes")
    h = float(horizon) / (n - 1)
    panels = (values[..., 0:-1:2] + 4.0 * values[..., 1::2] + values[..., 2::2]) * (h / 3.0)
    out = np.zeros(values.shape[:-1] + (panels.shape[-1] + 1,))
    np.cumsum(panels, axis=-1, out=out[..., 1:])
    return out
