"""
Agent modules for the ISE benchmark.
Each agent runs one stage of an experiment and is orchestrated by LangGraph.
"""
