"""Tabletop push simulator and clip rendering."""
