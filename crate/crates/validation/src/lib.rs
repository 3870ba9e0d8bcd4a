//! Holds only the `acceptance` test target. It lives in its own package so
//! it runs after every other suite in a workspace test run.
