"""Dataset ingestion, evaluation metrics, checkpoints and the CLI."""
