"""Key bindings and navigation shared by the explorer screens."""

from textual import on
from textual.screen import Screen
from textual.widgets import Button

from .constants import BUTTON_BACK, BUTTON_RUN


class BaseScreen(Screen):
    """Escape or the Back button returns to the menu; ctrl+r presses Run."""

    BINDINGS = [
        ("escape", "pop_screen", "Back"),
        ("ctrl+r", "run", "Run"),
    ]

    def action_pop_screen(self) -> None:
        """Pop the current screen and return to the previous one."""
        self.app.pop_screen()

    def action_run(self) -> None:
        """Press the screen's Run button, if it has one."""
        buttons = self.query(f"#{BUTTON_RUN}").results(Button)
        for button in buttons:
            if not button.disabled:
                button.press()

    @on(Button.Pressed, f"#{BUTTON_BACK}")
    def go_back(self) -> None:
        """Return to the menu."""
        self.app.pop_screen()
