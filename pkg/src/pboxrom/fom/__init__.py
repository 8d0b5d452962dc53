"""Full-order model builders: Timoshenko beam, heat lattice, Matrix Market import."""
