import math

import pytest
from jsonschema import validate

from service_protocol import (
    EMBED_SCHEMA,
    GENERATE_SCHEMA,
    HEALTH_SCHEMA,
    SOCAL_CONTEXT,
    SPECIFICITY_SCHEMA,
)

LONG_TEXT = "southern california " * 80


def pair(q_a: str = "What is SoCal?", c_a: str = SOCAL_CONTEXT) -> dict:
    return {
        "q_a": q_a,
        "c_a": c_a,
        "q_b": "Which counties does it include?",
        "c_b": "the ten counties of the southern area",
    }


class TestHealth:
    def test_payload(self, client, service_config) -> None:
        response = client.get("/health")
        assert response.status_code == 200
        body = response.json()
        validate(body, HEALTH_SCHEMA)
        assert body["model_ids"] == service_config.model_ids


class TestEmbedRoute:
    def test_happy_path(self, client) -> None:
        response = client.post(
            "/v1/embed", json={"texts": ["southern california", "ten counties"]}
        )
        assert response.status_code == 200
        body = response.json()
        validate(body, EMBED_SCHEMA)
        assert len(body["vectors"]) == 2
        assert body["truncated"] == [False, False]
        for vector in body["vectors"]:
            assert math.sqrt(sum(x * x for x in vector)) == pytest.approx(1.0, abs=1e-6)

    def test_truncation_flagged(self, client) -> None:
        response = client.post("/v1/embed", json={"texts": [LONG_TEXT]})
        assert response.json()["truncated"] == [True]

    def test_empty_list(self, client) -> None:
        response = client.post("/v1/embed", json={"texts": []})
        assert response.status_code == 200
        assert response.json() == {"vectors": [], "truncated": []}

    def test_blank_text_rejected(self, client) -> None:
        response = client.post("/v1/embed", json={"texts": ["ok", "   "]})
        assert response.status_code == 400
        body = response.json()
        assert body["error"] == "validation"
        assert any("texts[1]" in d["message"] for d in body["details"])

    def test_missing_field_named(self, client) -> None:
        response = client.post("/v1/embed", json={})
        assert response.status_code == 400
        assert any(d["field"] == "texts" for d in response.json()["details"])

    def test_wrong_type_named(self, client) -> None:
        response = client.post("/v1/embed", json={"texts": "not a list"})
        assert response.status_code == 400
        assert any(d["field"] == "texts" for d in response.json()["details"])

    def test_invalid_json_body(self, client) -> None:
        response = client.post(
            "/v1/embed", content=b"{nope", headers={"content-type": "application/json"}
        )
        assert response.status_code == 400
        assert response.json()["error"] == "validation"


class TestSpecificityRoute:
    def test_happy_path(self, client) -> None:
        response = client.post("/v1/specificity", json={"pairs": [pair()]})
        assert response.status_code == 200
        body = response.json()
        validate(body, SPECIFICITY_SCHEMA)
        (dist,) = body["distributions"]
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-3)

    def test_missing_pair_fields_named(self, client) -> None:
        response = client.post("/v1/specificity", json={"pairs": [{"q_a": "x"}]})
        assert response.status_code == 400
        fields = {d["field"] for d in response.json()["details"]}
        assert fields == {"pairs.0.c_a", "pairs.0.q_b", "pairs.0.c_b"}

    def test_truncation_flagged_per_pair(self, client) -> None:
        long_pair = {"q_a": LONG_TEXT, "c_a": LONG_TEXT, "q_b": "q", "c_b": "c"}
        response = client.post("/v1/specificity", json={"pairs": [pair(), long_pair]})
        assert response.json()["truncated"] == [False, True]

    def test_empty_list(self, client) -> None:
        response = client.post("/v1/specificity", json={"pairs": []})
        assert response.status_code == 200
        assert response.json() == {"distributions": [], "truncated": []}


class TestGenerateRoute:
    def test_happy_path(self, client) -> None:
        response = client.post("/v1/generate", json={"contexts": [SOCAL_CONTEXT]})
        assert response.status_code == 200
        body = response.json()
        validate(body, GENERATE_SCHEMA)
        (question,) = body["questions"]
        assert question.strip()
        assert question.endswith("?")

    def test_truncation_flagged(self, client) -> None:
        response = client.post("/v1/generate", json={"contexts": [LONG_TEXT, "short"]})
        assert response.json()["truncated"] == [True, False]

    def test_blank_context_rejected(self, client) -> None:
        response = client.post("/v1/generate", json={"contexts": [""]})
        assert response.status_code == 400
        assert any("contexts[0]" in d["message"] for d in response.json()["details"])

    def test_deterministic_responses(self, client) -> None:
        payload = {"contexts": ["the ten counties of the southern area"]}
        first = client.post("/v1/generate", json=payload)
        second = client.post("/v1/generate", json=payload)
        assert first.json() == second.json()


class TestErrorMapping:
    def test_model_failure_names_model(
        self, client, loaded_models, service_config, monkeypatch
    ) -> None:
        def boom(*args, **kwargs):
            raise RuntimeError("device exploded")

        monkeypatch.setattr(loaded_models.classifier, "model", boom)
        response = client.post("/v1/specificity", json={"pairs": [pair()]})
        assert response.status_code == 500
        body = response.json()
        assert body["error"] == "model failure"
        assert body["model_id"] == service_config.classifier_model
        assert body["role"] == "classifier"

    def test_unknown_route(self, client) -> None:
        assert client.post("/v1/unknown", json={}).status_code == 404

    def test_wrong_method(self, client) -> None:
        assert client.get("/v1/embed").status_code == 405
