"""Boundary combinatorics of toroidal compactifications of Siegel moduli with parahoric level."""
