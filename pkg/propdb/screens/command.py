"""Screens that run one CLI command on the explorer's query form."""

from rich.text import Text
from textual import on
from textual.app import ComposeResult
from textual.containers import Horizontal, Vertical, VerticalScroll
from textual.widgets import Button, Checkbox, Footer, Header, Select, Static
from textual.worker import Worker, WorkerState

from ..base_screen import BaseScreen
from ..cli import RunConfig, cmd_compare, cmd_dissociate, cmd_eval, cmd_plans
from ..constants import (
    BUTTON_BACK,
    BUTTON_RUN,
    DEFAULT_AP_K,
    METHOD_PROPAGATION,
    METHODS,
    MSG_RUNNING,
    OPT_NONE,
    OPTS,
)
from ..errors import PropDBError
from ..widgets import QueryForm, ResultPanel


class CommandScreen(BaseScreen):
    """Query form, a Run button and the command's text output."""

    CSS = """
    CommandScreen {
        layout: vertical;
    }

    QueryForm {
        border: solid $accent;
        height: auto;
        padding: 0 1;
    }

    #options {
        height: auto;
        padding: 0 1;
    }

    .button-row {
        layout: horizontal;
        height: auto;
        margin: 1 0;
    }

    .button-row Button {
        margin: 0 1;
    }

    ResultPanel {
        border: solid $primary;
        height: auto;
        padding: 0 1;
    }

    #output_container {
        border: solid $accent;
        height: 1fr;
    }
    """

    COMMAND = ""

    def __init__(self, schema: str = "", data: str = "", query: str = "", **kwargs):
        super().__init__(**kwargs)
        self.initial = (schema, data, query)
        self.last_output = ""

    def compose(self) -> ComposeResult:
        """Compose the screen."""
        yield Header()
        schema, data, query = self.initial
        yield QueryForm(schema, data, query)
        with Vertical(id="options"):
            yield from self.compose_options()
        with Horizontal(classes="button-row"):
            yield Button("▶ Run", variant="primary", id=BUTTON_RUN)
            yield Button("Back", id=BUTTON_BACK)
        yield ResultPanel(id="result_panel")
        with VerticalScroll(id="output_container"):
            yield Static(id="output")
        yield Footer()

    def compose_options(self) -> ComposeResult:
        """Extra option widgets of the command."""
        yield from ()

    def build_config(self, form: QueryForm) -> RunConfig:
        """Build and validate the configuration the command runs with."""
        raise NotImplementedError

    def run_command(self, cfg: RunConfig) -> str:
        raise NotImplementedError

    @on(Button.Pressed, f"#{BUTTON_RUN}")
    def start(self) -> None:
        """Validate the form and run the command in a worker."""
        form = self.query_one(QueryForm)
        result = self.query_one(ResultPanel)
        valid, message = form.validate_form()
        if not valid:
            result.show_error(message)
            return
        try:
            cfg = self.build_config(form)
        except PropDBError as e:
            result.show_error(str(e))
            return
        result.show_info(MSG_RUNNING)
        self.run_worker(lambda: self._execute(cfg), exclusive=True, thread=True)

    def _execute(self, cfg: RunConfig) -> tuple[bool, str]:
        try:
            return True, self.run_command(cfg)
        except PropDBError as e:
            return False, str(e)

    def on_worker_state_changed(self, event: Worker.StateChanged) -> None:
        """Show the command's output once the worker finishes."""
        if event.state != WorkerState.SUCCESS or event.worker.result is None:
            return
        ok, text = event.worker.result
        result = self.query_one(ResultPanel)
        if ok:
            self.last_output = text
            self.query_one("#output", Static).update(Text(text))
            result.show_success(f"{self.COMMAND} finished")
        else:
            result.show_error(text)


class PlansScreen(CommandScreen):
    """Minimal plans, incidence matrices and shared views."""

    COMMAND = "plans"
    TITLE = "Minimal plans"

    def compose_options(self) -> ComposeResult:
        yield Checkbox("Incidence matrices", id="matrices_check")
        yield Checkbox("Shared views", id="views_check")

    def build_config(self, form: QueryForm) -> RunConfig:
        cfg = RunConfig(
            command=self.COMMAND,
            schema=form.get_schema(),
            data=form.get_data(),
            query=form.query_text,
            matrices=self.query_one("#matrices_check", Checkbox).value,
            emit_views=self.query_one("#views_check", Checkbox).value,
        )
        cfg.validate()
        return cfg

    def run_command(self, cfg: RunConfig) -> str:
        return cmd_plans(cfg)


class EvaluateScreen(CommandScreen):
    """Scores of every answer under one method."""

    COMMAND = "eval"
    TITLE = "Evaluate"

    def compose_options(self) -> ComposeResult:
        yield Select([(m, m) for m in METHODS], value=METHOD_PROPAGATION, allow_blank=False, id="method_select")
        yield Select([(o, o) for o in OPTS], value=OPT_NONE, allow_blank=False, id="opt_select")

    def build_config(self, form: QueryForm) -> RunConfig:
        cfg = RunConfig(
            command=self.COMMAND,
            schema=form.get_schema(),
            data=form.get_data(),
            query=form.query_text,
            method=self.query_one("#method_select", Select).value,
            opt=self.query_one("#opt_select", Select).value,
        )
        cfg.validate()
        return cfg

    def run_command(self, cfg: RunConfig) -> str:
        return cmd_eval(cfg)


class CompareScreen(CommandScreen):
    """AP of each method against the exact ranking."""

    COMMAND = "compare"
    TITLE = "Compare methods"

    def build_config(self, form: QueryForm) -> RunConfig:
        cfg = RunConfig(
            command=self.COMMAND,
            schema=form.get_schema(),
            data=form.get_data(),
            query=form.query_text,
            k=DEFAULT_AP_K,
        )
        cfg.validate()
        return cfg

    def run_command(self, cfg: RunConfig) -> str:
        return cmd_compare(cfg)


class DissociateScreen(CommandScreen):
    """Dissociation lattice statistics."""

    COMMAND = "dissociate"
    TITLE = "Dissociation lattice"

    def build_config(self, form: QueryForm) -> RunConfig:
        cfg = RunConfig(command=self.COMMAND, schema=form.get_schema(), data=form.get_data(), query=form.query_text)
        cfg.validate()
        return cfg

    def run_command(self, cfg: RunConfig) -> str:
        return cmd_dissociate(cfg)
