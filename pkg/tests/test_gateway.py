import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from sciex import gateway
from sciex.exceptions import BackendError, SciexError
from sciex.model import AnswerFormat
from sciex.templates import PromptInstance


def make_prompts(n, format=AnswerFormat.TEXT):
    return [
        PromptInstance(
            record_id=f"r{i}",
            template_id="squad_v2-7",
            prompt=f"prompt number {i}",
            target=f"target number {i}",
            format=format,
        )
        for i in range(n)
    ]


class CountingEcho(gateway.EchoBackend):
    def __init__(self):
        self.calls = 0
        self.lock = threading.Lock()

    def generate(self, prompt, max_new_tokens):
        with self.lock:
            self.calls += 1
        return prompt


class FlakyBackend:
    identity = "flaky:"

    def __init__(self, fail_times):
        self.fail_times = fail_times
        self.attempts = {}

    def health(self):
        return None

    def generate(self, prompt, max_new_tokens):
        seen = self.attempts.get(prompt, 0)
        self.attempts[prompt] = seen + 1
        if seen < self.fail_times:
            raise gateway.TransientBackendFailure("blip")
        return f"ok:{prompt}"


class DownBackend:
    identity = "down:"

    def health(self):
        raise BackendError("unreachable")

    def generate(self, prompt, max_new_tokens):  # pragma: no cover
        raise AssertionError("should never be called")


CFG = gateway.BackendConfig(endpoint="echo:", backoff_base=0.001)


class TestGenerateBatch:
    def test_echo_contract(self):
        prompts = make_prompts(5)
        results = gateway.generate_batch(prompts, CFG, backend=gateway.EchoBackend())
        assert [r.completion for r in results] == [p.prompt for p in prompts]

    def test_alignment_at_scale(self):
        prompts = make_prompts(300)
        cfg = gateway.BackendConfig(endpoint="echo:", max_concurrency=4)
        results = gateway.generate_batch(prompts, cfg, backend=gateway.EchoBackend())
        assert len(results) == 300
        assert [r.record_id for r in results] == [p.record_id for p in prompts]
        assert len({r.completion for r in results}) == 300

    def test_multiset_independent_of_concurrency(self):
        prompts = make_prompts(40)
        outcomes = []
        for concurrency in (1, 3, 16):
            cfg = gateway.BackendConfig(endpoint="echo:", max_concurrency=concurrency)
            results = gateway.generate_batch(prompts, cfg, backend=gateway.EchoBackend())
            outcomes.append(sorted(r.completion for r in results))
        assert outcomes[0] == outcomes[1] == outcomes[2]

    def test_health_probe_failure_aborts(self):
        with pytest.raises(BackendError):
            gateway.generate_batch(make_prompts(2), CFG, backend=DownBackend())

    def test_transient_failures_retried(self):
        backend = FlakyBackend(fail_times=2)
        cfg = gateway.BackendConfig(endpoint="flaky:", max_retries=2, backoff_base=0.0)
        [result] = gateway.generate_batch(make_prompts(1), cfg, backend=backend)
        assert result.completion == "ok:prompt number 0"
        assert result.attempt == 3
        assert result.error is None

    def test_retry_exhaustion_is_item_level(self):
        backend = FlakyBackend(fail_times=99)
        cfg = gateway.BackendConfig(endpoint="flaky:", max_retries=1, backoff_base=0.0)
        results = gateway.generate_batch(make_prompts(3), cfg, backend=backend)
        assert all(r.error and "retries exhausted" in r.error for r in results)
        assert all(r.attempt == cfg.max_retries + 1 for r in results)

    def test_gold_backend_replays_targets(self, tmp_path):
        prompts = make_prompts(4)
        path = tmp_path / "prompts.jsonl"
        with open(path, "w") as fh:
            for p in prompts:
                fh.write(json.dumps(p.to_json()) + "\n")
        backend = gateway.backend_from_url(f"gold:{path}")
        results = gateway.generate_batch(prompts, CFG, backend=backend)
        assert [r.completion for r in results] == [p.target for p in prompts]

    def test_unknown_scheme(self):
        with pytest.raises(SciexError):
            gateway.backend_from_url("ftp://nope")


class TestCache:
    def test_second_run_hits_cache_only(self, tmp_path):
        prompts = make_prompts(10)
        cache = gateway.ResponseCache(tmp_path / "cache")
        backend = CountingEcho()
        first = gateway.generate_batch(prompts, CFG, backend=backend, cache=cache)
        assert backend.calls == 10
        second = gateway.generate_batch(prompts, CFG, backend=backend, cache=cache)
        assert backend.calls == 10  # zero new generate calls
        assert [r.completion for r in first] == [r.completion for r in second]
        assert all(r.attempt == 0 for r in second)

    def test_key_depends_on_backend_and_tokens(self):
        k1 = gateway.ResponseCache.key("p", "a", 10)
        assert k1 != gateway.ResponseCache.key("p", "b", 10)
        assert k1 != gateway.ResponseCache.key("p", "a", 11)
        assert k1 == gateway.ResponseCache.key("p", "a", 10)


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path == "/health":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"ok")
        else:
            self.send_response(404)
            self.end_headers()

    def do_POST(self):
        if self.path != "/generate":
            self.send_response(404)
            self.end_headers()
            return
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        body = json.dumps(
            {"completion": f"echo {payload['prompt']} [{payload['max_new_tokens']}]"}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def live_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestHttpBackend:
    def test_wire_contract(self, live_server):
        prompts = make_prompts(3)
        cfg = gateway.BackendConfig(endpoint=live_server, max_new_tokens=7)
        results = gateway.generate_batch(prompts, cfg)
        assert [r.completion for r in results] == [
            f"echo {p.prompt} [7]" for p in prompts
        ]

    def test_health_failure_when_down(self):
        cfg = gateway.BackendConfig(endpoint="http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(BackendError):
            gateway.generate_batch(make_prompts(1), cfg)


class TestExport:
    def test_export_counts_and_hash(self, tmp_path):
        prompts = make_prompts(12)
        out = tmp_path / "train.jsonl"
        manifest = gateway.export_finetune_dataset(
            prompts, out, strategy="all", subsample=1.0, seed=4
        )
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 12
        assert manifest.n_instances == 12
        assert json.loads(lines[0]) == {
            "prompt": "prompt number 0",
            "target": "target number 0",
        }
        again = gateway.export_finetune_dataset(
            prompts, tmp_path / "again.jsonl", strategy="all", subsample=1.0, seed=4
        )
        assert manifest.sha256 == again.sha256
        assert sum(manifest.per_template.values()) == len(lines)
        manifest_file = json.loads((tmp_path / "train.jsonl.manifest.json").read_text())
        assert manifest_file["n_instances"] == 12
        assert manifest_file["includes_train_only"] is False

    def test_empty_export_rejected(self, tmp_path):
        with pytest.raises(SciexError):
            gateway.export_finetune_dataset([], tmp_path / "x.jsonl")
