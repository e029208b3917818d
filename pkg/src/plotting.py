"""
Static SVG plots of diagnostics series and convergence tables.
"""
import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .convergence import ConvergenceTable  # noqa: E402
from .diagnostics import CSV_COLUMNS, DiagnosticsSeries  # noqa: E402

logger = logging.getLogger(__name__)

PANEL_COLUMNS = 3


def plot_diagnostics(series: DiagnosticsSeries, path: Union[str, Path]) -> Path:
    """One line plot per diagnostics column against time."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [name for name in CSV_COLUMNS if name != 't']
    rows = -(-len(names) // PANEL_COLUMNS)
    fig, axes = plt.subplots(rows, PANEL_COLUMNS, figsize=(4 * PANEL_COLUMNS, 2.8 * rows), sharex=True)
    t = series.column('t')
    for ax, name in zip(axes.flat, names):
        ax.plot(t, series.column(name), lw=1.2)
        ax.set_title(name, fontsize=9)
        ax.grid(True, alpha=0.3)
    mass_ax = axes.flat[names.index('mass')]
    mass_ax.plot(t, series.column('mass_bound'), 'k--', lw=0.8, label='bound')
    mass_ax.legend(fontsize=7)
    for ax in list(axes.flat)[len(names):]:
        ax.set_visible(False)
    for ax in axes[-1]:
        ax.set_xlabel('t')
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    logger.info("diagnostics plot written: %s", path)
    return path


def plot_convergence(table: ConvergenceTable, path: Union[str, Path]) -> Path:
    """Log-log errors against the refined parameter."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parameter = table.column('parameter')
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, marker in (('l1_error_n', 'o-'), ('l2_error_grad_p', 's-')):
        values = table.column(name)
        positive = values > 0
        if np.any(positive):
            ax.loglog(parameter[positive], values[positive], marker, label=name)
    ax.set_xlabel(table.axis.value)
    ax.set_ylabel('error')
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    logger.info("convergence plot written: %s", path)
    return path
