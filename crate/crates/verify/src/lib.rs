//! Holds the `acceptance` test target. It lives in its own package so that a
//! failing criterion does not stop the other test targets under fail-fast.
