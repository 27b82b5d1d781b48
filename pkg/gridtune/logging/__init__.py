"""
================
gridtune.logging
================

Console output for long-running computations: a progress bar for
stochastic simulations and summary tables for command results.
"""
import math

import numpy as np

import rich
from rich.console import Console
from rich.table import Table, Column
from rich.text import Text
import rich.box
from rich.progress import (
    SpinnerColumn,
    BarColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)


def _format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


def summary_table(title, rows):
    """
    Build a two-column table of named results.

    Args:
        title: The table title.
        rows: Dictionary mapping quantity names to values.

    Returns:
        ``rich.table.Table``
    """
    table = Table(
        Column(header="Quantity", style="bold"),
        Column(header="Value", justify="right"),
        title=title,
        box=rich.box.SIMPLE,
        expand=False,
    )
    for name, value in rows.items():
        table.add_row(Text(str(name)), Text(_format_value(value)))
    return table


def print_summary(title, rows, console=None):
    """
    Print a summary table to the console.
    """
    if console is None:
        console = Console(stderr=True)
    console.print(summary_table(title, rows))


class Progress(rich.progress.Progress):
    """
    Specialization of the rich progress bar (``rich.progress.Progress``) that
    adds a title to the progress bar.
    """

    def __init__(self, *args, title="Simulation", **kwargs):
        self.title = title
        try:
            super().__init__(*args, refresh_per_second=2, **kwargs)
            super().start()
        except rich.errors.LiveError:
            pass

    def get_renderables(self):
        """
        Overrides get_renderables method to add a title to the progress
        bar.
        """
        table = self.make_tasks_table(self.tasks)
        table.title = f"\n {self.title} progress:"
        yield table


class SimulationLogger:
    """
    Tracks the progress of a simulation that advances in blocks of time
    steps and keeps a running estimate of the output variance.
    """

    def __init__(self, n_blocks, title="Simulation", enabled=True):
        """
        Args:
            n_blocks: The number of blocks the simulation is split into.
            title: Title shown above the progress bar.
            enabled: If ``False`` nothing is displayed.
        """
        self.n_blocks = n_blocks
        self.title = title
        self.enabled = enabled
        self.i_block = 0
        self.progress = None
        self.task = None

    def __enter__(self):
        if self.enabled:
            self.progress = Progress(
                TextColumn("{task.description}"),
                SpinnerColumn(),
                TextColumn("Block {task.completed:4} / {task.total:4}"),
                BarColumn(),
                TimeElapsedColumn(table_column=Column(header="Elapsed")),
                TextColumn("/"),
                TimeRemainingColumn(table_column=Column(header="Remaining")),
                TextColumn("|"),
                TextColumn("[red]Estimate: {task.fields[estimate]:1.4g}[/red]"),
                title=self.title,
                transient=True,
            )
            self.task = self.progress.add_task(
                self.title, total=self.n_blocks, estimate=np.nan
            )
        return self

    def __exit__(self, *args, **kwargs):
        if self.progress is not None:
            self.progress.stop()
            self.progress = None

    def block(self, estimate=np.nan):
        """
        Signal that a block of time steps has been simulated.

        Args:
            estimate: The current estimate of the simulated quantity.
        """
        self.i_block += 1
        if self.progress is not None:
            self.progress.update(self.task, completed=self.i_block, estimate=estimate)
