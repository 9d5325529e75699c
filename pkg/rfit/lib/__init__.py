__all__ = []
# shared library code: data model, split search, trees, forests, simulations
