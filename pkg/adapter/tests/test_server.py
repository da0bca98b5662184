import threading
import time

import pytest
from fastapi.testclient import TestClient

from sciex_adapter.server import CheckpointRunner, create_app


@pytest.fixture(scope="module")
def runner(toy_checkpoint):
    return CheckpointRunner(toy_checkpoint, num_beams=1, max_input_len=64)


@pytest.fixture(scope="module")
def client(runner):
    return TestClient(create_app(runner))


class TestWireSchema:
    def test_health_returns_200(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_generate_returns_completion_string(self, client):
        response = client.post(
            "/generate", json={"prompt": "Outbreak study 0", "max_new_tokens": 8}
        )
        assert response.status_code == 200
        payload = response.json()
        assert set(payload) == {"completion"}
        assert isinstance(payload["completion"], str)

    def test_generate_validates_payload(self, client):
        assert client.post("/generate", json={}).status_code == 422
        assert (
            client.post(
                "/generate", json={"prompt": "x", "max_new_tokens": 0}
            ).status_code
            == 422
        )

    def test_greedy_decoding_is_deterministic(self, client):
        body = {"prompt": "Abstract 2 reporting a basic reproduction", "max_new_tokens": 12}
        first = client.post("/generate", json=body).json()["completion"]
        second = client.post("/generate", json=body).json()["completion"]
        assert first == second


@pytest.fixture(scope="module")
def live_server(runner):
    import uvicorn

    config = uvicorn.Config(
        create_app(runner), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestGatewayIntegration:
    def test_primary_gateway_drives_the_adapter(self, live_server):
        # the pipeline's own HTTP client is the reference consumer
        from sciex.gateway import BackendConfig, generate_batch
        from sciex.model import AnswerFormat
        from sciex.templates import PromptInstance

        prompts = [
            PromptInstance(
                record_id=f"r{i}",
                template_id="squad_v2-7",
                prompt=f"Outbreak study {i}",
                target="",
                format=AnswerFormat.TEXT,
            )
            for i in range(3)
        ]
        cfg = BackendConfig(
            endpoint=live_server, max_new_tokens=8, max_concurrency=2, timeout=60
        )
        results = generate_batch(prompts, cfg)
        assert len(results) == 3
        assert all(r.error is None for r in results)
        assert all(isinstance(r.completion, str) for r in results)
        again = generate_batch(prompts, cfg)
        assert [r.completion for r in results] == [r.completion for r in again]
