"""Text encoder package (tokenizer, transformer encoder, pooler, MLM)."""
