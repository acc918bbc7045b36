"""Task-multiplexed inference service speaking the remote-classifier wire
protocol: POST /v1/classify with {"task", "texts"}, GET /v1/health."""

__version__ = "0.1.0"
