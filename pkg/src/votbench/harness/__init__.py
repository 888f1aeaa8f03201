"""Training, evaluation and the zero-shot and fine-tuning protocols."""
