class CircuitError(ValueError):
    """A circuit or gate failed validation.

    ``diagnostics`` holds one ``"<field path>: <problem>"`` string per issue.
    """

    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))
