"""Knowledge-augmented multiple-choice reasoning."""
