import asyncio
import os
import sys

from mcp.client.session import ClientSession
from mcp.client.sse import sse_client


async def main(problem: str, bits: str) -> None:
    base_url = os.environ.get("MCP_HTTP_BASE", "http://localhost:8000")
    async with sse_client(f"{base_url}/sse") as (read, write):
        async with ClientSession(read, write) as session:
            await session.initialize()
            result = await session.call_tool(
                "evaluate_bitstring", arguments={"problem": problem, "bits": bits}
            )
            print(result.structuredContent or result.content)


if __name__ == "__main__":
    args = sys.argv[1:]
    problem = args[0] if args else "trap:6:3"
    bits = args[1] if len(args) > 1 else "111000"
    asyncio.run(main(problem, bits))
