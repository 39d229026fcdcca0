import pytest


def pytest_addoption(parser):
    parser.addoption("--ingest-dump", help="path of the ingest_dump helper")
    parser.addoption("--make-fixture", help="path of the make_fixture helper")
    parser.addoption("--layer-samples", help="path of the layer_samples helper")
    parser.addoption("--schema", help="path of layer.schema.json")


def _required(config, name):
    value = config.getoption(name)
    if not value:
        pytest.skip(f"{name} not given")
    return value


@pytest.fixture
def ingest_dump(request):
    return _required(request.config, "--ingest-dump")


@pytest.fixture
def make_fixture(request):
    return _required(request.config, "--make-fixture")


@pytest.fixture
def layer_samples(request):
    return _required(request.config, "--layer-samples")


@pytest.fixture
def schema_path(request):
    return _required(request.config, "--schema")
