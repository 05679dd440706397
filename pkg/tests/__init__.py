"""
Test suite for the knowing-how toolkit.

Unit tests per module, hypothesis property suites, and end-to-end
reproductions of the fixture models and derivation corpus.
"""
