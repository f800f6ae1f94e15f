import pytest
from fastapi.testclient import TestClient

from model_service import ServiceConfig, create_app, load_models
from model_service.checkpoints import build_tiny_checkpoints


@pytest.fixture(scope="session")
def checkpoint_paths(tmp_path_factory) -> dict[str, str]:
    return build_tiny_checkpoints(tmp_path_factory.mktemp("checkpoints"), seed=0)


@pytest.fixture(scope="session")
def service_config(checkpoint_paths) -> ServiceConfig:
    # Small budgets keep the miniature generator fast; production defaults
    # are exercised separately in the config tests.
    return ServiceConfig(
        generator_model=checkpoint_paths["generator"],
        classifier_model=checkpoint_paths["classifier"],
        embedder_model=checkpoint_paths["embedder"],
        max_context_tokens=64,
        max_question_tokens=16,
        batch_size=8,
    )


@pytest.fixture(scope="session")
def loaded_models(service_config):
    return load_models(service_config)


@pytest.fixture(scope="session")
def client(service_config, loaded_models) -> TestClient:
    app = create_app(service_config, loaded_models)
    return TestClient(app, raise_server_exceptions=False)
