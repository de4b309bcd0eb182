"""Goursat sub-Riemannian structure"""
