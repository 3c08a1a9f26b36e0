# Shared helpers: logger, exceptions and small utilities
