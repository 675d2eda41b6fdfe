"""Terminal output and prompts for the spectra-dd CLI."""

from typing import Any, Dict, List, Optional, Sequence

import questionary
from questionary import Style
from questionary import print as qprint
from rich.console import Console
from rich.table import Table


class ConsoleUI:
    """Styled messages, result tables and menu prompts."""

    def __init__(self, console: Optional[Console] = None, style: Optional[Style] = None):
        self.console = console or Console()
        self.style = style or Style(
            [
                ("question", "bold blue"),
                ("answer", "fg:#ff9d00 bold"),
                ("pointer", "fg:#673ab7 bold"),
                ("highlighted", "fg:#673ab7 bold"),
                ("instruction", "italic"),
            ]
        )

    def show_title(self, title: str, icon: str = "📡"):
        qprint(f"\n{icon} {title}", style="bold blue")
        qprint("=" * (len(title) + 3), style="blue")

    def show_success(self, message: str, icon: str = "✅"):
        qprint(f"{icon} {message}", style="bold green")

    def show_error(self, message: str, icon: str = "❌"):
        qprint(f"{icon} {message}", style="bold red")

    def show_warning(self, message: str, icon: str = "⚠️"):
        qprint(f"{icon} {message}", style="bold yellow")

    def show_info(self, message: str, icon: str = "ℹ️"):
        qprint(f"{icon} {message}", style="bold")

    def show_step(self, message: str):
        qprint(f"   → {message}", style="dim")

    def table(
        self,
        rows: Sequence[Dict[str, Any]],
        headers: Optional[List[str]] = None,
        title: Optional[str] = None,
    ):
        """Print rows of dictionaries as a table; floats use 6 significant digits."""
        if not rows:
            self.show_info("No data to display")
            return
        headers = headers or list(rows[0].keys())
        table = Table(title=title, header_style="bold blue")
        for header in headers:
            table.add_column(header)
        for row in rows:
            table.add_row(*(_cell(row.get(h, "")) for h in headers))
        self.console.print(table)

    def confirm(self, message: str, default: bool = True) -> Optional[bool]:
        try:
            return questionary.confirm(message, default=default, style=self.style).ask()
        except KeyboardInterrupt:
            self.show_error("Operation cancelled by user")
            return False

    def select(
        self, message: str, choices: List[str], default: Optional[str] = None
    ) -> Optional[str]:
        """Pick one of ``choices``; ``default`` (or the first) on Ctrl-C, None if dismissed."""
        if not choices:
            raise ValueError("Choices list cannot be empty")
        try:
            return questionary.select(
                message, choices=choices, default=default, style=self.style
            ).ask()
        except KeyboardInterrupt:
            self.show_error("Operation cancelled by user")
            return default or choices[0]

    def prompt(self, message: str, default: str = "") -> Optional[str]:
        try:
            return questionary.text(message, default=default, style=self.style).ask()
        except KeyboardInterrupt:
            self.show_error("Operation cancelled by user")
            return default


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ", ".join(_cell(v) for v in value)
    return str(value)
