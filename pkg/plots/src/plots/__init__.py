"""Render SER figures from sweep CSV files.

Read-only post-processing for the simulator's exported results: each CSV
(``sweep_axis,sweep_value,user,detector,trials,symbols,errors,ser,wall_ms``)
becomes one figure with a log-scale SER axis and one line per
(user, detector) series. This package never imports the simulator; the CSV
schema is the only interface.
"""

from .render import CurveSpec, PlotsError, read_rows, render, render_all

__all__ = ["CurveSpec", "PlotsError", "read_rows", "render", "render_all"]
