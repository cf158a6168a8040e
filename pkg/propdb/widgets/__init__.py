"""Custom widgets for the explorer."""

from rich.markup import escape
from textual.widgets import Static

from .query_form import QueryForm


class ResultPanel(Static):
    """Status line of the last command: success, error or progress.

    ``last_message`` keeps the plain text of what is shown, without markup.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.border_title = "Result"
        self.last_message = ""

    def _show(self, color: str, icon: str, message: str) -> None:
        self.last_message = message
        self.update(f"[{color}]{icon} {escape(message)}[/{color}]")

    def show_success(self, message: str) -> None:
        self._show("green", "✓", message)

    def show_error(self, message: str) -> None:
        """Display an error, e.g. a query parse error with its position."""
        self._show("red", "✗", message)

    def show_info(self, message: str) -> None:
        self._show("blue", "ℹ", message)

    def clear(self) -> None:
        self.last_message = ""
        self.update("")


__all__ = ["QueryForm", "ResultPanel"]
