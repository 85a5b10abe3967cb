"""narrator: explain temporal change between before/after satellite image
pairs with pluggable vision-language backends, then score and rate the
explanations."""

__version__ = "0.1.0"
