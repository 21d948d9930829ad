from .crawler import (
    MAX_SEED_HASHTAGS,
    ApiClient,
    CrawlConfig,
    CrawlConfigError,
    CrawlError,
    HashtagCrawl,
    crawl_hashtags,
    crawl_timelines,
    run_pipeline,
)
from .records import (
    Dataset,
    IngestError,
    dumps_line,
    load_dataset,
    parse_records,
    read_jsonl,
    save_dataset,
    write_jsonl,
)
from .server import FixtureServer, decode_cursor, encode_cursor, serve_fixture_api

__all__ = [
    "MAX_SEED_HASHTAGS",
    "ApiClient",
    "CrawlConfig",
    "CrawlConfigError",
    "CrawlError",
    "Dataset",
    "FixtureServer",
    "HashtagCrawl",
    "IngestError",
    "crawl_hashtags",
    "crawl_timelines",
    "decode_cursor",
    "dumps_line",
    "encode_cursor",
    "load_dataset",
    "parse_records",
    "read_jsonl",
    "run_pipeline",
    "save_dataset",
    "serve_fixture_api",
    "write_jsonl",
]
