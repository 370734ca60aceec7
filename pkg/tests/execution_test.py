import pytest

from app.adapters import Adapter, AdapterRegistry
from app.exceptions import (
    AdapterFailureError,
    AdapterNotFoundError,
    BindingValidationError,
    MappingError,
    OperationInvalidError,
    PlanningError,
    RecursionLimitError,
    UnboundReturnError,
)
from app.execution import OperationExecutor, ValueBinding, apply_mapping
from app.schemas import AdapterDeclaration
from app.seed import (
    CONTACT,
    DOWNLOAD_OPERATION,
    EMAIL_ADDRESS,
    LOCATION,
    ORCID_EMAIL_OPERATION,
    PYTHON_ADAPTER,
)
from app.serialization import serialize_entity
from tests.builders import atomic, attribute, constant, interface, link, operation, pid, step, store_with

ORCID_VALUE = "https://orcid.org/0000-0002-1825-0097"
PATTERN = "([a-z]+)([0-9]+)"


# ============== ORCiD e-mail operation ==============

def test_orcid_email(executor):
    assert executor.execute(ORCID_EMAIL_OPERATION, ORCID_VALUE) == {EMAIL_ADDRESS: "josiah.carberry@example.org"}


def test_execution_leaves_store_unchanged(executor, seeded):
    before = [serialize_entity(entity) for entity in seeded.entities()]
    executor.execute(ORCID_EMAIL_OPERATION, ORCID_VALUE)
    assert [serialize_entity(entity) for entity in seeded.entities()] == before


def test_input_must_conform(executor):
    with pytest.raises(BindingValidationError) as exc_info:
        executor.execute(ORCID_EMAIL_OPERATION, "https://example.org/people/42")
    assert exc_info.value.attribute == CONTACT
    assert exc_info.value.results


def test_lookup_miss_is_an_adapter_failure(executor):
    with pytest.raises(AdapterFailureError) as exc_info:
        executor.execute(ORCID_EMAIL_OPERATION, "https://orcid.org/0000-0001-5109-3700")
    assert exc_info.value.step == 1
    assert exc_info.value.adapter == PYTHON_ADAPTER
    assert isinstance(exc_info.value.cause, LookupError)


def test_download_has_no_adapter(executor):
    with pytest.raises(AdapterNotFoundError):
        executor.execute(DOWNLOAD_OPERATION, {LOCATION: "https://example.org/data/42"})


# ============== Local operations ==============

def regex_store(*entities):
    """Attributes and a regex interface under the 'test' namespace."""
    return store_with(
        atomic("s"),
        attribute("in", "s"), attribute("a", "s"), attribute("text", "s"), attribute("pattern", "s"),
        attribute("matches", "s", 0, None), attribute("out", "s"), attribute("other", "s"),
        attribute("result", "s"), attribute("never", "s"),
        interface("ti", ["text", "pattern"], ["matches"], adapters=["regex"]),
        *entities,
    )


def regex_call(index, reads, writes, group=0):
    return step(index, "ti", inputs=[link(reads, "text"), constant(PATTERN, "pattern")],
                outputs=[link("matches", writes, index=group)])


def regex_executor(store, serial=None, **options):
    adapters = AdapterRegistry.from_declarations(
        [AdapterDeclaration(adapter_pid=pid("regex"), implements_interface_pid=pid("ti"), builtin="Regex",
                            serial=serial)])
    return OperationExecutor(store, adapters, **options)


def test_regex_operation():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out", group=2)], returns=["out"]))
    assert regex_executor(store).execute(pid("op"), "abc123") == {pid("out"): "123"}


@pytest.mark.parametrize("options", [{}, {"max_workers": 1}, {"serial": True}])
def test_steps_in_one_stage(options):
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out", 1), regex_call(1, "in", "other", 2)],
                                  returns=["out", "other"]))
    returns = regex_executor(store, **options).execute(pid("op"), "abc123")
    assert returns == {pid("out"): "abc", pid("other"): "123"}


def test_steps_in_sequence():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out", 0), regex_call(1, "out", "other", 1)],
                                  returns=["other"]))
    assert regex_executor(store).execute(pid("op"), "xyz7") == {pid("other"): "xyz"}


def test_index_out_of_range():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out")], returns=["out"]))
    with pytest.raises(MappingError):
        regex_executor(store).execute(pid("op"), "no digits")


def test_unbound_return():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out")], returns=["out", "never"]))
    with pytest.raises(UnboundReturnError) as exc_info:
        regex_executor(store).execute(pid("op"), "abc123")
    assert exc_info.value.attributes == [pid("never")]


def test_invalid_operation_is_refused():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out")], returns=["out"]),
                        operation("broken", "in", [step(0, "missing")]))
    with pytest.raises(OperationInvalidError):
        regex_executor(store).execute(pid("broken"), "abc123")


def test_step_group():
    group = step(0, steps=[regex_call(0, "a", "out", 1)], inputs=[link("in", "a")], outputs=[link("out", "result")])
    store = regex_store(operation("op", "in", [group], returns=["result"]))
    assert regex_executor(store).execute(pid("op"), "abc123") == {pid("result"): "abc"}


# ============== Sub-operations ==============

@pytest.fixture
def nested_store():
    return regex_store(
        operation("inner", "in", [regex_call(0, "in", "out")], returns=["out"]),
        operation("outer", "in", [step(0, operation="inner", inputs=[link("in", "in")],
                                       outputs=[link("out", "result")])], returns=["result"]),
    )


def test_sub_operation(nested_store):
    assert regex_executor(nested_store).execute(pid("outer"), "abc123") == {pid("result"): "abc123"}


def test_recursion_limit(nested_store):
    with pytest.raises(RecursionLimitError) as exc_info:
        regex_executor(nested_store, max_depth=1).execute(pid("outer"), "abc123")
    assert exc_info.value.limit == 1


# ============== Bindings ==============

def test_scalar_bound_to_list_attribute_is_wrapped():
    store = regex_store()
    bindings = ValueBinding(store)
    bindings.bind(pid("matches"), "x")
    assert bindings.get(pid("matches")) == ["x"]


def test_single_valued_attribute_rejects_lists():
    with pytest.raises(BindingValidationError):
        ValueBinding(regex_store()).bind(pid("out"), ["a", "b"])


def test_template_mapping():
    store = regex_store()
    bindings = ValueBinding(store, {pid("in"): "0000-0001"})
    apply_mapping(link("in", "out", template="run <v>", marker="<v>"), bindings, store)
    apply_mapping(constant(["a", "b"], "other", index=1, template="got {{input}}"), bindings, store)
    assert bindings.get(pid("out")) == "run 0000-0001"
    assert bindings.get(pid("other")) == "got b"


def test_unbound_source():
    store = regex_store()
    with pytest.raises(MappingError):
        apply_mapping(link("in", "out"), ValueBinding(store), store)


# ============== Adapter calls ==============

class RecordingAdapter(Adapter):
    """Regex-shaped adapter that records its calls and returns a fixed output."""

    name = "Recording"
    input_arity = 2
    output_arity = 1

    def __init__(self, output):
        super().__init__()
        self.output = output
        self.calls = []

    def execute(self, inputs):
        self.calls.append(list(inputs))
        return [self.output]


def recording_executor(store, adapter):
    adapters = AdapterRegistry()
    adapters.register(pid("regex"), pid("ti"), adapter)
    return OperationExecutor(store, adapters)


def test_unplannable_sub_operation_is_refused_before_any_adapter_call():
    store = regex_store(
        operation("inner", "in", [regex_call(0, "never", "out")], returns=["out"]),
        operation("outer", "in", [regex_call(0, "in", "other"),
                                  step(1, operation="inner", inputs=[link("in", "in")],
                                       outputs=[link("out", "result")])],
                  returns=["result"]),
    )
    adapter = RecordingAdapter(["x"])
    with pytest.raises(PlanningError):
        recording_executor(store, adapter).execute(pid("outer"), "v")
    assert adapter.calls == []


def test_sub_operation_plans_are_made_once():
    store = regex_store(
        operation("inner", "in", [regex_call(0, "in", "out")], returns=["out"]),
        operation("outer", "in", [step(0, operation="inner", inputs=[link("in", "in")],
                                       outputs=[link("out", "other")]),
                                  step(1, operation="inner", inputs=[link("in", "in")],
                                       outputs=[link("out", "result")])],
                  returns=["other", "result"]),
    )
    executor = regex_executor(store)
    outer = store.get(pid("outer"))
    assert set(executor.preflight(outer)) == {pid("inner")}
    assert executor.execute(pid("outer"), "abc123") == {pid("other"): "abc123", pid("result"): "abc123"}


def test_nonconforming_adapter_output_names_the_step():
    store = regex_store(operation("op", "in", [regex_call(0, "in", "out")], returns=["out"]))
    adapter = RecordingAdapter([5])
    with pytest.raises(AdapterFailureError) as exc_info:
        recording_executor(store, adapter).execute(pid("op"), "abc")
    assert exc_info.value.step == 0
    assert exc_info.value.adapter == pid("regex")
    assert isinstance(exc_info.value.cause, BindingValidationError)
    assert adapter.calls == [["abc", PATTERN]]
