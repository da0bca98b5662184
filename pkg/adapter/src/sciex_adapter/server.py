"""HTTP service implementing the sciex gateway wire contract.

GET /health -> 200 once the checkpoint is loaded; POST /generate with
{"prompt": str, "max_new_tokens": int} -> {"completion": str}. Decoding is
greedy by default so identical prompts yield identical completions;
beam count is configurable and echoed by /health for run manifests.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI
from pydantic import BaseModel, Field


class GenerateRequest(BaseModel):
    prompt: str
    max_new_tokens: int = Field(default=128, ge=1)


class GenerateResponse(BaseModel):
    completion: str


class CheckpointRunner:
    """Loads a seq2seq checkpoint and generates completions."""

    def __init__(self, checkpoint: str | Path, num_beams: int = 1, max_input_len: int = 512):
        import torch
        from transformers import AutoTokenizer, T5ForConditionalGeneration

        self.checkpoint = str(checkpoint)
        self.num_beams = num_beams
        self.max_input_len = max_input_len
        self.tokenizer = AutoTokenizer.from_pretrained(self.checkpoint)
        self.model = T5ForConditionalGeneration.from_pretrained(self.checkpoint)
        self.model.eval()
        self._torch = torch

    def generate(self, prompt: str, max_new_tokens: int) -> str:
        encoded = self.tokenizer(
            prompt,
            return_tensors="pt",
            truncation=True,
            max_length=self.max_input_len,
        )
        with self._torch.no_grad():
            output = self.model.generate(
                **encoded,
                max_new_tokens=max_new_tokens,
                do_sample=False,
                num_beams=self.num_beams,
            )
        return self.tokenizer.decode(output[0], skip_special_tokens=True)


def create_app(runner: CheckpointRunner) -> FastAPI:
    app = FastAPI(title="sciex-adapter")

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "checkpoint": runner.checkpoint,
            "num_beams": runner.num_beams,
        }

    @app.post("/generate", response_model=GenerateResponse)
    def generate(request: GenerateRequest):
        return GenerateResponse(
            completion=runner.generate(request.prompt, request.max_new_tokens)
        )

    return app


def serve(checkpoint: str, port: int, host: str = "127.0.0.1", num_beams: int = 1,
          max_input_len: int = 512) -> None:
    """Blocking entry point; loads the checkpoint before binding the port."""
    import uvicorn

    runner = CheckpointRunner(checkpoint, num_beams=num_beams, max_input_len=max_input_len)
    uvicorn.run(create_app(runner), host=host, port=port, log_level="warning")
