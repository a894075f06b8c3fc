"""Layout-prior reasoning: caption-to-layout pretraining and knowledge-augmented QA."""

__all__: list[str] = []
