"""
内置插件: 生命周期各环节与每个子命令各一个插件
"""
