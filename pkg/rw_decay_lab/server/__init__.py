from .app import server, create_mcp_server

__all__ = ['server', 'create_mcp_server']
