"""Crisis-news chat pipeline: crawl, clean, annotate, convert, chat, alert."""

__version__ = "0.1.0"
