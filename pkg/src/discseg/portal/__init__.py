"""Multi-annotator disc tracing portal: HTTP API, stroke storage, rendering."""
