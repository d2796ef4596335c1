# Test package for hydrofriction
