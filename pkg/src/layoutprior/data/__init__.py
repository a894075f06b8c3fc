"""Dataset ingestion: scene layouts, multiple-choice QA and the synthetic grammar."""
