"""Query form: schema path, data directory and query text."""

from pathlib import Path

from textual.app import ComposeResult
from textual.containers import Vertical
from textual.reactive import reactive
from textual.widgets import Input, Label, Static

from ..constants import MSG_MISSING_QUERY, MSG_MISSING_SCHEMA


class QueryForm(Static):
    """Inputs for the files and query an explorer command runs on."""

    schema_path = reactive("")
    data_dir = reactive("")
    query_text = reactive("")

    def __init__(self, schema: str = "", data: str = "", query: str = "", **kwargs):
        """Initialize the form.

        Args:
            schema: Initial schema file path.
            data: Initial data directory.
            query: Initial query text.
            **kwargs: Additional widget arguments.
        """
        super().__init__(**kwargs)
        self.border_title = "Query"
        self.set_reactive(QueryForm.schema_path, schema)
        self.set_reactive(QueryForm.data_dir, data)
        self.set_reactive(QueryForm.query_text, query)

    def compose(self) -> ComposeResult:
        """Create child widgets."""
        with Vertical():
            yield Label("Schema file")
            yield Input(value=self.schema_path, placeholder="schema.txt", id="schema-input")
            yield Label("Data directory")
            yield Input(value=self.data_dir, placeholder="directory of <relation>.tsv", id="data-input")
            yield Label("Query")
            yield Input(value=self.query_text, placeholder="q(x) :- R(x), S(x,y)", id="query-input")

    def on_input_changed(self, event: Input.Changed) -> None:
        """Mirror the inputs into the reactive fields."""
        if event.input.id == "schema-input":
            self.schema_path = event.value.strip()
        elif event.input.id == "data-input":
            self.data_dir = event.value.strip()
        elif event.input.id == "query-input":
            self.query_text = event.value.strip()

    def validate_form(self) -> tuple[bool, str]:
        """Check the required fields.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not self.schema_path:
            return False, MSG_MISSING_SCHEMA
        if not self.query_text:
            return False, MSG_MISSING_QUERY
        return True, ""

    def get_schema(self) -> Path:
        return Path(self.schema_path).expanduser()

    def get_data(self) -> Path | None:
        if not self.data_dir:
            return None
        return Path(self.data_dir).expanduser()
