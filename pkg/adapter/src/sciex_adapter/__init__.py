"""sciex-adapter: seq2seq backend and finetuner behind the sciex wire contract."""

__version__ = "0.1.0"
