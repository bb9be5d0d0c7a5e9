//! Runs the book's code snippets as doc-tests; see `book/` at the repo root.
