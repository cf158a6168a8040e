"""Interactive explorer for propdb plans and scores."""

import sys

from textual import on
from textual.app import App, ComposeResult
from textual.containers import Container, Vertical
from textual.widgets import Button, Footer, Header, Static

from propdb.constants import (
    APP_NAME,
    BUTTON_COMPARE,
    BUTTON_DISSOCIATE,
    BUTTON_EVAL,
    BUTTON_PLANS,
    VERSION,
)


class PropDBExplorer(App):
    """Menu of the explorer's command screens."""

    CSS = """
    PropDBExplorer {
        background: $surface;
    }

    #main_container {
        align: center middle;
        width: 100%;
        height: 100%;
    }

    #menu_container {
        width: 50;
        height: auto;
        border: solid $primary;
        padding: 2;
        background: $panel;
    }

    #title {
        text-align: center;
        margin: 1 0;
        color: $accent;
    }

    #version {
        text-align: center;
        margin: 1 0;
        color: $text-muted;
    }

    .menu-buttons {
        layout: vertical;
        width: 100%;
        height: auto;
        align: center middle;
    }

    .menu-buttons Button {
        margin: 1 0;
        width: 100%;
        max-width: 40;
    }
    """

    TITLE = APP_NAME
    SUB_TITLE = VERSION

    BINDINGS = [
        ("q", "quit", "Quit"),
        ("p", "show_plans", "Plans"),
        ("e", "show_eval", "Evaluate"),
    ]

    def __init__(self, schema: str = "", data: str = "", query: str = ""):
        """Initialize the application.

        Args:
            schema: Schema file to prefill on every screen.
            data: Data directory to prefill.
            query: Query text to prefill.
        """
        super().__init__()
        self.defaults = {"schema": schema, "data": data, "query": query}

    def compose(self) -> ComposeResult:
        """Create child widgets for the app."""
        yield Header()

        with Container(id="main_container"):
            with Vertical(id="menu_container"):
                yield Static(f"[bold]{APP_NAME}[/bold]", id="title")
                yield Static(f"[dim]{VERSION}[/dim]", id="version")

                with Vertical(classes="menu-buttons"):
                    yield Button("🌳 Minimal Plans", variant="primary", id=BUTTON_PLANS)
                    yield Button("📊 Evaluate", id=BUTTON_EVAL)
                    yield Button("⚖️  Compare Methods", id=BUTTON_COMPARE)
                    yield Button("🔀 Dissociation Lattice", id=BUTTON_DISSOCIATE)

        yield Footer()

    @on(Button.Pressed, f"#{BUTTON_PLANS}")
    def action_show_plans(self) -> None:
        """Show plans screen."""
        from propdb.screens import PlansScreen

        self.push_screen(PlansScreen(**self.defaults))

    @on(Button.Pressed, f"#{BUTTON_EVAL}")
    def action_show_eval(self) -> None:
        """Show evaluate screen."""
        from propdb.screens import EvaluateScreen

        self.push_screen(EvaluateScreen(**self.defaults))

    @on(Button.Pressed, f"#{BUTTON_COMPARE}")
    def action_show_compare(self) -> None:
        """Show compare screen."""
        from propdb.screens import CompareScreen

        self.push_screen(CompareScreen(**self.defaults))

    @on(Button.Pressed, f"#{BUTTON_DISSOCIATE}")
    def action_show_dissociate(self) -> None:
        """Show dissociation lattice screen."""
        from propdb.screens import DissociateScreen

        self.push_screen(DissociateScreen(**self.defaults))


def main():
    """Run the explorer; optional arguments prefill schema, data and query."""
    args = sys.argv[1:4]
    app = PropDBExplorer(*args)
    app.run()


if __name__ == "__main__":
    main()
